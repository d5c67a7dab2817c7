#pragma once

// Geometry of the Gaussian Monge problem: the cost J(A) = Tr(S0 (I-A)^T (I-A)),
// the metric G_A(X, Y) = Tr(S0 X^T Y), the congruence projection
// pi(A) = A S0 A^T and the vertical/horizontal splitting of T_A GL(n).

#include <cstdint>
#include <utility>

#include "polarflow/matcore.hpp"
#include "polarflow/random.hpp"
#include "polarflow/sylvester.hpp"

namespace polarflow {

/// Default tolerance for membership in O(n, S0).
inline constexpr double kOrthogonalTol = 1e-8;

/// Sigma -> A Sigma A^T, symmetrized and validated.
template <typename Scalar>
SpdMatrix<Scalar> congruence_push(const Matrix<Scalar>& a, const SpdMatrix<Scalar>& sigma) {
  require_square(a, "congruence_push matrix");
  require_same_size(a, sigma.matrix(), "congruence_push");
  inverse_det(a);  // throws Singular
  return SpdMatrix<Scalar>::symmetrized(a * sigma.matrix() * a.transpose());
}

/// Problem instance: source covariance S0, initial matrix A and the target
/// covariance S1 = A S0 A^T. Inverses of A and S0 are factored once here.
template <typename Scalar>
class MongeInstance {
 public:
  static MongeInstance create(SpdMatrix<Scalar> sigma0, Matrix<Scalar> a,
                              bool allow_negative_det = false) {
    require_square(a, "initial matrix");
    require_same_size(a, sigma0.matrix(), "Monge instance");
    auto a_inv = inverse_det(a);
    if (!(a_inv.det > Scalar(0)) && !allow_negative_det) {
      throw Error(ErrorCode::NegativeDeterminant,
                  "det(A) = " + std::to_string(double(a_inv.det)) +
                      " is outside the identity component");
    }
    auto sigma1 = congruence_push(a, sigma0);
    auto sigma0_inv = inverse_det(sigma0.matrix()).inverse;
    return MongeInstance(std::move(sigma0), std::move(a), std::move(sigma1),
                         std::move(a_inv.inverse), std::move(sigma0_inv), a_inv.det,
                         allow_negative_det);
  }

  static MongeInstance create(Matrix<Scalar> a, bool allow_negative_det = false) {
    const auto n = a.rows();
    return create(SpdMatrix<Scalar>::identity(n), std::move(a), allow_negative_det);
  }

  const SpdMatrix<Scalar>& sigma0() const noexcept { return sigma0_; }
  const SpdMatrix<Scalar>& sigma1() const noexcept { return sigma1_; }
  const Matrix<Scalar>& a() const noexcept { return a_; }
  const Matrix<Scalar>& a_inverse() const noexcept { return a_inv_; }
  const Matrix<Scalar>& sigma0_inverse() const noexcept { return sigma0_inv_; }
  const Matrix<Scalar>& sigma1_sqrt() const noexcept { return sigma1_sqrt_; }
  const Matrix<Scalar>& sigma1_inv_sqrt() const noexcept { return sigma1_inv_sqrt_; }
  Scalar det_a() const noexcept { return det_a_; }
  bool allow_negative_det() const noexcept { return allow_negative_det_; }
  Eigen::Index size() const noexcept { return a_.rows(); }

 private:
  MongeInstance(SpdMatrix<Scalar> sigma0, Matrix<Scalar> a, SpdMatrix<Scalar> sigma1,
                Matrix<Scalar> a_inv, Matrix<Scalar> sigma0_inv, Scalar det_a,
                bool allow_negative_det)
      : sigma0_(std::move(sigma0)),
        sigma1_(std::move(sigma1)),
        a_(std::move(a)),
        a_inv_(std::move(a_inv)),
        sigma0_inv_(std::move(sigma0_inv)),
        det_a_(det_a),
        allow_negative_det_(allow_negative_det),
        sigma1_sqrt_(spd_sqrt(sigma1_).matrix()),
        sigma1_inv_sqrt_(spd_inv_sqrt(sigma1_).matrix()) {}

  SpdMatrix<Scalar> sigma0_;
  SpdMatrix<Scalar> sigma1_;
  Matrix<Scalar> a_;
  Matrix<Scalar> a_inv_;
  Matrix<Scalar> sigma0_inv_;
  Scalar det_a_;
  bool allow_negative_det_;
  Matrix<Scalar> sigma1_sqrt_;
  Matrix<Scalar> sigma1_inv_sqrt_;
};

using MongeInstanceXd = MongeInstance<double>;

/// G_A(X, Y) = Tr(S0 X^T Y). Independent of the base point A; it is kept in
/// the signature to mirror the tangent-space reading.
template <typename Scalar>
Scalar metric_g(const Matrix<Scalar>& a, const Matrix<Scalar>& adot1, const Matrix<Scalar>& adot2,
                const SpdMatrix<Scalar>& sigma0) {
  require_same_size(a, sigma0.matrix(), "metric_g base point");
  require_same_size(adot1, sigma0.matrix(), "metric_g tangent 1");
  require_same_size(adot2, sigma0.matrix(), "metric_g tangent 2");
  return (sigma0.matrix() * adot1.transpose() * adot2).trace();
}

template <typename Scalar>
Scalar squared_distance(const Matrix<Scalar>& a0, const Matrix<Scalar>& a1,
                        const SpdMatrix<Scalar>& sigma0) {
  require_same_size(a0, a1, "distance");
  require_same_size(a0, sigma0.matrix(), "distance");
  const Matrix<Scalar> d = a0 - a1;
  return (sigma0.matrix() * d.transpose() * d).trace();
}

template <typename Scalar>
Scalar distance(const Matrix<Scalar>& a0, const Matrix<Scalar>& a1,
                const SpdMatrix<Scalar>& sigma0) {
  return std::sqrt(std::max(squared_distance(a0, a1, sigma0), Scalar(0)));
}

/// J(A) = Tr(S0 (I - A)^T (I - A)) = d^2(I, A).
template <typename Scalar>
Scalar cost_j(const Matrix<Scalar>& a, const SpdMatrix<Scalar>& sigma0) {
  require_same_size(a, sigma0.matrix(), "cost_j");
  return squared_distance(Matrix<Scalar>::Identity(a.rows(), a.cols()).eval(), a, sigma0);
}

template <typename Scalar>
struct MonteCarloEstimate {
  Scalar estimate;
  Scalar std_error;
};

/// Sample mean of ||x - A x||^2 for x ~ N(0, S0), drawn as x = S0^{1/2} z
/// with z from a seeded Box-Muller stream.
template <typename Scalar>
MonteCarloEstimate<Scalar> cost_j_monte_carlo(const Matrix<Scalar>& a,
                                              const SpdMatrix<Scalar>& sigma0,
                                              std::int64_t samples, std::uint64_t seed) {
  require_same_size(a, sigma0.matrix(), "cost_j_monte_carlo");
  if (samples < 2) throw Error(ErrorCode::InvalidArgument, "Monte Carlo needs samples >= 2");

  const Eigen::Index n = a.rows();
  const Matrix<Scalar> map =
      (Matrix<Scalar>::Identity(n, n) - a) * spd_sqrt(sigma0).matrix();
  NormalStream normal(seed);
  Vector<Scalar> z(n);

  // Welford accumulation.
  Scalar mean(0);
  Scalar m2(0);
  for (std::int64_t k = 0; k < samples; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) z(i) = Scalar(normal());
    const Scalar value = (map * z).squaredNorm();
    const Scalar delta = value - mean;
    mean += delta / Scalar(k + 1);
    m2 += delta * (value - mean);
  }
  const Scalar variance = m2 / Scalar(samples - 1);
  return {mean, std::sqrt(variance / Scalar(samples))};
}

/// ||B S0 B^T - S1||_F / ||S1||_F.
template <typename Scalar>
Scalar fiber_residual(const Matrix<Scalar>& b, const MongeInstance<Scalar>& inst) {
  require_same_size(b, inst.a(), "fiber_residual");
  const auto& s1 = inst.sigma1().matrix();
  return (b * inst.sigma0().matrix() * b.transpose() - s1).norm() / s1.norm();
}

/// True iff ||Q S0 Q^T - S0||_F <= tol ||S0||_F.
template <typename Scalar>
bool in_generalized_orthogonal(const Matrix<Scalar>& q, const SpdMatrix<Scalar>& sigma0,
                               Scalar tol = Scalar(kOrthogonalTol)) {
  if (q.rows() != sigma0.size() || q.cols() != sigma0.size()) return false;
  const auto& s0 = sigma0.matrix();
  return (q * s0 * q.transpose() - s0).norm() <= tol * s0.norm();
}

template <typename Scalar>
struct TangentSplit {
  Matrix<Scalar> vertical_coeff;    // V with V Sigma skew
  Matrix<Scalar> horizontal_coeff;  // U symmetric
  Matrix<Scalar> base_point;        // A
  SpdMatrix<Scalar> sigma;          // pi(A)

  Matrix<Scalar> vertical() const { return vertical_coeff * base_point; }
  Matrix<Scalar> horizontal() const { return horizontal_coeff * base_point; }
};

/// Splits Adot = (V + U) A with V in o(n, Sigma), U symmetric, Sigma = pi(A).
/// U is the symmetric solution of U Sigma + Sigma U = M Sigma + Sigma M^T
/// where M = Adot A^{-1}; the remainder V = M - U is then vertical.
template <typename Scalar>
TangentSplit<Scalar> tangent_split(const Matrix<Scalar>& adot, const Matrix<Scalar>& a,
                                   const SpdMatrix<Scalar>& sigma0) {
  require_same_size(adot, a, "tangent_split");
  const auto inv = inverse_det(a);
  auto sigma = congruence_push(a, sigma0);
  const Matrix<Scalar> m = adot * inv.inverse;
  const auto& s = sigma.matrix();
  Matrix<Scalar> u = symmetric_part(solve_lyapunov(sigma, Matrix<Scalar>(m * s + s * m.transpose())));
  Matrix<Scalar> v = m - u;
  return {std::move(v), std::move(u), a, std::move(sigma)};
}

}  // namespace polarflow
