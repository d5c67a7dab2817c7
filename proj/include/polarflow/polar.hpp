#pragma once

// Polar decomposition A = P Q with P symmetric positive definite and
// Q in O(n, S0) = {Q : Q S0 Q^T = S0}, computed two independent ways: as the
// limit of the vertical gradient flow, and directly (SVD for S0 = I, a
// congruence square-root formula otherwise).

#include <cstdint>
#include <optional>
#include <string_view>

#include <Eigen/SVD>

#include "polarflow/flow.hpp"
#include "polarflow/geometry.hpp"
#include "polarflow/matcore.hpp"

namespace polarflow {

/// Below this lambda_min / lambda_max of S1 the factors are not trusted.
inline constexpr double kMinReciprocalCondition = 1e-10;

/// A flow run counts as converged for polar purposes once ||Omega||_F <= this.
inline constexpr double kPolarOmegaAccept = 1e-6;

enum class PolarMethod { flow, oracle };

constexpr std::string_view to_string(PolarMethod m) {
  return m == PolarMethod::flow ? "flow" : "oracle";
}

template <typename Scalar>
struct PolarFactors {
  SpdMatrix<Scalar> p;
  Matrix<Scalar> q;
  PolarMethod method;
  // Flow diagnostics; zero for the oracle.
  std::int64_t steps = 0;
  Scalar final_omega_norm = 0;
};

/// Thrown by polar_via_flow when ||Omega|| is still above the acceptance
/// threshold at max_steps. Carries the factors built from the last iterate
/// when they could be formed.
template <typename Scalar>
class NotConvergedError : public Error {
 public:
  NotConvergedError(const std::string& what, std::optional<PolarFactors<Scalar>> factors)
      : Error(ErrorCode::NotConverged, what), factors_(std::move(factors)) {}

  const std::optional<PolarFactors<Scalar>>& factors() const noexcept { return factors_; }

 private:
  std::optional<PolarFactors<Scalar>> factors_;
};

enum class OracleRoute {
  automatic,   // SVD when S0 = I, congruence formula otherwise
  svd,         // requires S0 = I
  congruence,  // any S0
};

namespace detail {

template <typename Scalar>
void require_well_conditioned(const MongeInstance<Scalar>& inst) {
  const auto& s1 = inst.sigma1();
  if (s1.min_eigenvalue() / s1.max_eigenvalue() < Scalar(kMinReciprocalCondition)) {
    throw Error(ErrorCode::IllConditioned,
                "target covariance condition number " + std::to_string(double(s1.condition())) +
                    " is too large");
  }
}

}  // namespace detail

/// Direct polar factors.
///
/// With S0 = I: A = W diag(s) V^T gives P = W diag(s) W^T, Q = W V^T.
/// Otherwise P = S0^{-1/2} (S0^{1/2} S1 S0^{1/2})^{1/2} S0^{-1/2}, the unique
/// SPD solution of P S0 P = S1, and Q = P^{-1} A.
template <typename Scalar>
PolarFactors<Scalar> polar_oracle(const MongeInstance<Scalar>& inst,
                                  OracleRoute route = OracleRoute::automatic) {
  if (!(inst.det_a() > Scalar(0)) && !inst.allow_negative_det()) {
    throw Error(ErrorCode::NegativeDeterminant, "polar oracle requires det(A) > 0");
  }
  detail::require_well_conditioned(inst);

  const bool identity = inst.sigma0().is_identity();
  if (route == OracleRoute::automatic) route = identity ? OracleRoute::svd : OracleRoute::congruence;

  if (route == OracleRoute::svd) {
    if (!identity) throw Error(ErrorCode::InvalidArgument, "SVD route needs S0 = I");
    const Eigen::JacobiSVD<Matrix<Scalar>> svd(inst.a(), Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Matrix<Scalar>& w = svd.matrixU();
    Matrix<Scalar> p = w * svd.singularValues().asDiagonal() * w.transpose();
    return {SpdMatrix<Scalar>::symmetrized(p), w * svd.matrixV().transpose(), PolarMethod::oracle};
  }

  const auto root0 = spd_sqrt(inst.sigma0());
  const Matrix<Scalar> inv_root0 = spd_inv_sqrt(inst.sigma0());
  const auto middle = SpdMatrix<Scalar>::symmetrized(root0.matrix() * inst.sigma1().matrix() *
                                                     root0.matrix());
  auto p = SpdMatrix<Scalar>::symmetrized(inv_root0 * spd_sqrt(middle).matrix() * inv_root0);
  Matrix<Scalar> q = inverse_det(p.matrix()).inverse * inst.a();
  return {std::move(p), std::move(q), PolarMethod::oracle};
}

/// P as the limit of the Lie-Euler flow, symmetrized before validation;
/// Q = P^{-1} A.
template <typename Scalar>
PolarFactors<Scalar> polar_via_flow(const MongeInstance<Scalar>& inst,
                                    const FlowOptions& opts = {}) {
  if (!(inst.det_a() > Scalar(0))) {
    throw Error(ErrorCode::NegativeDeterminant,
                "the flow only reaches P for det(A) > 0");
  }
  detail::require_well_conditioned(inst);

  const auto trace = integrate(inst, opts);
  auto make_factors = [&]() {
    auto p = SpdMatrix<Scalar>::symmetrized(trace.final_b());
    Matrix<Scalar> q = inverse_det(p.matrix()).inverse * inst.a();
    return PolarFactors<Scalar>{std::move(p), std::move(q), PolarMethod::flow, trace.steps_taken,
                                trace.final_omega_norm};
  };

  if (trace.final_omega_norm > Scalar(kPolarOmegaAccept)) {
    std::optional<PolarFactors<Scalar>> partial;
    try {
      partial = make_factors();
    } catch (const Error&) {
    }
    throw NotConvergedError<Scalar>("||Omega||_F = " + std::to_string(double(trace.final_omega_norm)) +
                                        " after " + std::to_string(trace.steps_taken) + " steps",
                                    std::move(partial));
  }
  return make_factors();
}

struct DecompositionReport {
  bool reconstructs = false;
  bool p_symmetric = false;
  bool p_positive_definite = false;
  bool q_isotropy = false;
  bool p_on_fiber = false;

  bool all() const noexcept {
    return reconstructs && p_symmetric && p_positive_definite && q_isotropy && p_on_fiber;
  }
};

template <typename Scalar>
DecompositionReport verify_decomposition(const Matrix<Scalar>& a, const Matrix<Scalar>& p,
                                         const Matrix<Scalar>& q, const SpdMatrix<Scalar>& sigma0,
                                         Scalar tol) {
  DecompositionReport report;
  const auto& s0 = sigma0.matrix();
  if (a.rows() != s0.rows() || p.rows() != s0.rows() || q.rows() != s0.rows() ||
      a.cols() != s0.cols() || p.cols() != s0.cols() || q.cols() != s0.cols()) {
    return report;
  }
  report.reconstructs = (p * q - a).norm() <= tol * a.norm();
  report.p_symmetric = relative_asymmetry(p) <= tol;
  try {
    report.p_positive_definite = sym_eig(symmetric_part(p)).min_eigenvalue() > Scalar(0);
  } catch (const Error&) {
    report.p_positive_definite = false;
  }
  report.q_isotropy = in_generalized_orthogonal(q, sigma0, tol);
  const Matrix<Scalar> sigma1 = a * s0 * a.transpose();
  report.p_on_fiber = (p * s0 * p.transpose() - sigma1).norm() <= tol * sigma1.norm();
  return report;
}

template <typename Scalar>
DecompositionReport verify_decomposition(const Matrix<Scalar>& a, const PolarFactors<Scalar>& f,
                                         const SpdMatrix<Scalar>& sigma0, Scalar tol) {
  return verify_decomposition(a, f.p.matrix(), f.q, sigma0, tol);
}

}  // namespace polarflow
