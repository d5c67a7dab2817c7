#pragma once

// Lyapunov-form Sylvester equation  Sigma X + X Sigma = C  with Sigma SPD.

#include <cstdint>

#include "polarflow/matcore.hpp"
#include "polarflow/random.hpp"

namespace polarflow {

template <typename Scalar>
struct LyapunovSystem {
  SpdMatrix<Scalar> sigma;
  Matrix<Scalar> rhs;

  LyapunovSystem(SpdMatrix<Scalar> s, Matrix<Scalar> c) : sigma(std::move(s)), rhs(std::move(c)) {
    require_same_size(sigma.matrix(), rhs, "Lyapunov system");
  }
};

/// Largest dimension accepted by the Kronecker oracle (n^4 storage).
inline constexpr Eigen::Index kKroneckerMaxDim = 32;

/// Solves in the eigenbasis of Sigma: with C~ = Q^T C Q,
/// X = Q [C~_ij / (lambda_i + lambda_j)] Q^T.
template <typename Scalar, typename Derived>
Matrix<Scalar> solve_lyapunov(const SpdMatrix<Scalar>& sigma, const Eigen::MatrixBase<Derived>& rhs) {
  require_same_size(sigma.matrix(), rhs, "solve_lyapunov");
  const auto& e = sigma.eig();
  Matrix<Scalar> ct = e.basis.transpose() * rhs * e.basis;
  const Eigen::Index n = ct.rows();
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) ct(i, j) /= e.eigenvalues(i) + e.eigenvalues(j);
  return e.basis * ct * e.basis.transpose();
}

template <typename Scalar>
Matrix<Scalar> solve_lyapunov(const LyapunovSystem<Scalar>& sys) {
  return solve_lyapunov(sys.sigma, sys.rhs);
}

/// The n^2 x n^2 operator I (x) Sigma + Sigma (x) I acting on column-stacked
/// vec(X), so that vec(Sigma X + X Sigma) = K vec(X).
template <typename Scalar>
Matrix<Scalar> kronecker_operator(const Matrix<Scalar>& sigma) {
  const Eigen::Index n = sigma.rows();
  Matrix<Scalar> k = Matrix<Scalar>::Zero(n * n, n * n);
  for (Eigen::Index b = 0; b < n; ++b) {
    // I (x) Sigma: Sigma repeated on the diagonal blocks.
    k.block(b * n, b * n, n, n) += sigma;
    // Sigma (x) I: block (b, d) is sigma(b, d) * I.
    for (Eigen::Index d = 0; d < n; ++d)
      k.block(b * n, d * n, n, n).diagonal().array() += sigma(b, d);
  }
  return k;
}

/// Brute-force oracle: assemble the Kronecker operator explicitly and solve
/// the dense n^2 system with full-pivot LU.
template <typename Scalar, typename Derived>
Matrix<Scalar> solve_lyapunov_kron(const SpdMatrix<Scalar>& sigma,
                                   const Eigen::MatrixBase<Derived>& rhs_expr) {
  require_same_size(sigma.matrix(), rhs_expr, "solve_lyapunov_kron");
  const Matrix<Scalar> rhs = rhs_expr;
  const Eigen::Index n = sigma.size();
  if (n > kKroneckerMaxDim) {
    throw Error(ErrorCode::DimensionTooLarge,
                "Kronecker oracle is capped at n = " + std::to_string(kKroneckerMaxDim));
  }
  const Matrix<Scalar> k = kronecker_operator(sigma.matrix());
  const Vector<Scalar> rhs_vec = Eigen::Map<const Vector<Scalar>>(rhs.data(), n * n);
  const Vector<Scalar> x = k.fullPivLu().solve(rhs_vec);
  return Eigen::Map<const Matrix<Scalar>>(x.data(), n, n);
}

template <typename Scalar>
Matrix<Scalar> solve_lyapunov_kron(const LyapunovSystem<Scalar>& sys) {
  return solve_lyapunov_kron(sys.sigma, sys.rhs);
}

/// Sep(Sigma) = min_X ||X Sigma + Sigma X||_F / ||X||_F, which is
/// 2 lambda_min(Sigma) for SPD Sigma.
template <typename Scalar>
Scalar sep(const SpdMatrix<Scalar>& sigma) {
  return Scalar(2) * sigma.min_eigenvalue();
}

template <typename Scalar>
Scalar sep_ratio(const SpdMatrix<Scalar>& sigma, const Matrix<Scalar>& x) {
  const auto& s = sigma.matrix();
  return (x * s + s * x).norm() / x.norm();
}

/// Empirical upper estimate of Sep: minimum ratio over `samples` standard
/// normal matrices and the eigenprojector witness v v^T of lambda_min.
template <typename Scalar>
Scalar sep_sample(const SpdMatrix<Scalar>& sigma, std::int64_t samples, std::uint64_t seed) {
  if (samples < 1) throw Error(ErrorCode::InvalidArgument, "sep_sample needs samples >= 1");
  const Eigen::Index n = sigma.size();
  const Vector<Scalar> v = sigma.eig().min_eigenvector();
  Scalar best = sep_ratio(sigma, Matrix<Scalar>(v * v.transpose()));

  NormalStream normal(seed);
  Matrix<Scalar> x(n, n);
  for (std::int64_t k = 0; k < samples; ++k) {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) x(i, j) = Scalar(normal());
    if (x.norm() == Scalar(0)) continue;
    best = std::min(best, sep_ratio(sigma, x));
  }
  return best;
}

}  // namespace polarflow
