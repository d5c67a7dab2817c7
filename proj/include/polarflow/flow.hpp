#pragma once

// Right-reduced vertical gradient flow
//
//   Bdot = Omega B,   S1 Omega + Omega S1 = 2 S1 (B^{-1} - B^{-T}),   B(0) = A,
//
// integrated with the Lie-Euler scheme B_{k+1} = exp(h Omega_k) B_k. Since
// Omega S1 is skew, exp(h Omega) lies in O(n, S1) and the iterates stay on
// the fiber {B : B S0 B^T = S1}.

#include <cstdint>
#include <optional>
#include <vector>

#include "polarflow/geometry.hpp"
#include "polarflow/matcore.hpp"
#include "polarflow/sylvester.hpp"

namespace polarflow {

/// Above this fiber residual the on-fiber identities no longer hold and
/// integration aborts with OffFiber.
inline constexpr double kOffFiberThreshold = 1e-6;

struct FlowOptions {
  double h = 0.1;
  std::int64_t max_steps = 300;
  double omega_tol = 1e-10;
  std::int64_t record_every = 1;
  /// When false, run exactly max_steps steps regardless of ||Omega||.
  bool stop_early = true;
  /// Cross-check the inverse-free B^{-1} against LU inversion at recorded steps.
  bool check_inverse = false;
};

template <typename Scalar>
struct FlowState {
  Matrix<Scalar> b;
  std::int64_t step_index = 0;
  Scalar time = 0;
};

template <typename Scalar>
struct FlowTrace {
  std::vector<FlowState<Scalar>> states;
  std::vector<Scalar> cost;
  std::vector<Scalar> omega_norm;
  std::vector<Scalar> fiber_res;
  std::vector<Scalar> dist_to_ref_sq;  // empty without a reference

  // Diagnostics over every step, recorded or not.
  std::int64_t steps_taken = 0;
  bool converged = false;
  Scalar final_omega_norm = 0;
  Scalar max_fiber_residual = 0;
  /// max ||Omega S1 + S1 Omega^T||_F / (||Omega||_F ||S1||_F)
  Scalar max_skew_defect = 0;
  /// largest per-step increase of J, 0 for a monotone run
  Scalar max_cost_increase = 0;
  /// max ||B^{-1}_fiber - B^{-1}_LU||_F / ||B^{-1}||_F, only with check_inverse
  Scalar max_inverse_discrepancy = 0;

  std::size_t size() const noexcept { return states.size(); }
  const Matrix<Scalar>& final_b() const { return states.back().b; }
  bool has_reference() const noexcept { return !dist_to_ref_sq.empty(); }
  bool cost_monotone(Scalar tol = Scalar(1e-8)) const { return max_cost_increase <= tol; }
};

namespace detail {

template <typename Scalar>
Matrix<Scalar> b_inverse_unchecked(const Matrix<Scalar>& b, const MongeInstance<Scalar>& inst) {
  return inst.sigma0().matrix() * b.transpose() * inst.a_inverse().transpose() *
         inst.sigma0_inverse() * inst.a_inverse();
}

template <typename Scalar>
Matrix<Scalar> omega_from_inverse(const Matrix<Scalar>& b_inv, const MongeInstance<Scalar>& inst) {
  const Matrix<Scalar> skew = b_inv - b_inv.transpose();
  const Matrix<Scalar> rhs = Scalar(2) * inst.sigma1().matrix() * skew;
  return solve_lyapunov(inst.sigma1(), rhs);
}

/// exp(h Omega) B evaluated as B + S1^{1/2} (exp(h W) - I) S1^{-1/2} B with
/// W = S1^{-1/2} Omega S1^{1/2}, which is skew because Omega S1 is. The
/// orthogonal inner exponential keeps an ill-conditioned S1 from amplifying
/// rounding into fiber drift, and the increment form leaves B untouched as
/// Omega vanishes.
template <typename Scalar>
Matrix<Scalar> group_exp_apply(const Matrix<Scalar>& omega, const Matrix<Scalar>& b,
                               const MongeInstance<Scalar>& inst, Scalar h) {
  const Matrix<Scalar> w = inst.sigma1_inv_sqrt() * omega * inst.sigma1_sqrt();
  const Matrix<Scalar> skew = (w - w.transpose()) / Scalar(2);
  return b + inst.sigma1_sqrt() *
                 (mat_expm1(Matrix<Scalar>(h * skew)) * (inst.sigma1_inv_sqrt() * b));
}

template <typename Scalar>
void require_on_fiber(Scalar residual) {
  if (!(residual <= Scalar(kOffFiberThreshold))) {
    throw Error(ErrorCode::OffFiber,
                "fiber residual " + std::to_string(double(residual)) + " exceeds " +
                    std::to_string(kOffFiberThreshold));
  }
}

}  // namespace detail

/// B^{-1} = S0 B^T A^{-T} S0^{-1} A^{-1}, valid only on the fiber of `inst`.
template <typename Scalar>
Matrix<Scalar> b_inverse_fiber(const Matrix<Scalar>& b, const MongeInstance<Scalar>& inst) {
  detail::require_on_fiber(fiber_residual(b, inst));
  return detail::b_inverse_unchecked(b, inst);
}

/// Reduced gradient Omega, the unique solution of
/// S1 Omega + Omega S1 = 2 S1 (B^{-1} - B^{-T}).
template <typename Scalar>
Matrix<Scalar> compute_omega(const Matrix<Scalar>& b, const MongeInstance<Scalar>& inst) {
  return detail::omega_from_inverse(b_inverse_fiber(b, inst), inst);
}

/// dJ/dt along the flow: -2 Tr(S0 Omega B).
template <typename Scalar>
Scalar djdt(const Matrix<Scalar>& b, const Matrix<Scalar>& omega,
            const MongeInstance<Scalar>& inst) {
  return Scalar(-2) * (inst.sigma0().matrix() * omega * b).trace();
}

template <typename Scalar>
FlowState<Scalar> lie_euler_step(const FlowState<Scalar>& state, const MongeInstance<Scalar>& inst,
                                 Scalar h) {
  const Matrix<Scalar> omega = compute_omega(state.b, inst);
  const std::int64_t next = state.step_index + 1;
  return {detail::group_exp_apply(omega, state.b, inst, h), next, Scalar(next) * h};
}

/// ||Omega S1 + S1 Omega^T||_F relative to ||Omega||_F ||S1||_F.
template <typename Scalar>
Scalar skew_defect(const Matrix<Scalar>& omega, const SpdMatrix<Scalar>& sigma1) {
  const auto& s = sigma1.matrix();
  const Scalar scale = omega.norm() * s.norm();
  if (scale == Scalar(0)) return Scalar(0);
  return (omega * s + s * omega.transpose()).norm() / scale;
}

inline void validate(const FlowOptions& opts) {
  if (!(opts.h > 0.0)) throw Error(ErrorCode::InvalidArgument, "step size h must be positive");
  if (opts.max_steps < 1) throw Error(ErrorCode::InvalidArgument, "max_steps must be >= 1");
  if (opts.record_every < 1) throw Error(ErrorCode::InvalidArgument, "record_every must be >= 1");
  if (!(opts.omega_tol >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "omega_tol must be non-negative");
}

/// Lie-Euler integration from B_0 = A until ||Omega_k||_F <= omega_tol or
/// max_steps. Records every record_every-th state and always the final one.
/// With a reference P, also records d^2(B_k, P).
template <typename Scalar>
FlowTrace<Scalar> integrate(const MongeInstance<Scalar>& inst, const FlowOptions& opts,
                            const std::optional<Matrix<Scalar>>& reference = std::nullopt) {
  validate(opts);
  if (!(inst.det_a() > Scalar(0)) && !inst.allow_negative_det()) {
    throw Error(ErrorCode::NegativeDeterminant, "flow requires det(A) > 0");
  }
  if (reference) require_same_size(*reference, inst.a(), "flow reference");

  const Scalar h = Scalar(opts.h);
  FlowTrace<Scalar> trace;
  Matrix<Scalar> b = inst.a();
  Scalar prev_cost = cost_j(b, inst.sigma0());

  for (std::int64_t k = 0;; ++k) {
    const Scalar residual = fiber_residual(b, inst);
    detail::require_on_fiber(residual);
    const Matrix<Scalar> b_inv = detail::b_inverse_unchecked(b, inst);
    const Matrix<Scalar> omega = detail::omega_from_inverse(b_inv, inst);
    const Scalar omega_norm = omega.norm();
    const Scalar cost = cost_j(b, inst.sigma0());

    trace.max_fiber_residual = std::max(trace.max_fiber_residual, residual);
    trace.max_skew_defect = std::max(trace.max_skew_defect, skew_defect(omega, inst.sigma1()));
    if (k > 0) trace.max_cost_increase = std::max(trace.max_cost_increase, cost - prev_cost);
    prev_cost = cost;

    const bool converged = omega_norm <= Scalar(opts.omega_tol);
    const bool last = (opts.stop_early && converged) || k == opts.max_steps;
    if (k % opts.record_every == 0 || last) {
      trace.states.push_back({b, k, Scalar(k) * h});
      trace.cost.push_back(cost);
      trace.omega_norm.push_back(omega_norm);
      trace.fiber_res.push_back(residual);
      if (reference) trace.dist_to_ref_sq.push_back(squared_distance(b, *reference, inst.sigma0()));
      if (opts.check_inverse) {
        const Matrix<Scalar> direct = inverse_det(b).inverse;
        trace.max_inverse_discrepancy =
            std::max(trace.max_inverse_discrepancy, Scalar((b_inv - direct).norm() / direct.norm()));
      }
    }
    if (last) {
      trace.steps_taken = k;
      trace.converged = converged;
      trace.final_omega_norm = omega_norm;
      break;
    }
    b = detail::group_exp_apply(omega, b, inst, h);
  }
  return trace;
}

}  // namespace polarflow
