#pragma once

#include <cstdint>

#include "eoslab/loss.hpp"
#include "eoslab/spectral.hpp"
#include "eoslab/types.hpp"

namespace eos {

enum class PhiStatus : std::uint8_t { Converged, MaxTimeExceeded, Diverged };

struct PhiOptions {
  double tol = 0.0;            // <= 0 picks 1e-10 * (1 + lambda1 at x)
  double max_flow_time = 1e9;
  long max_steps = 2'000'000;
  double initial_step = 0.0;   // <= 0 picks 0.1 / lambda1 at x
  double max_step_factor = 0.8;  // step cap in units of 1 / lambda1
  Index top_k = 2;             // eigenpairs attached at the endpoint
  PowerIterOptions eig;
};

/// Endpoint of gradient flow started at x, with the Hessian spectrum there.
struct PhiResult {
  Vector phi;
  double residual_grad_norm = 0.0;
  double flow_time_used = 0.0;
  double value_at_phi = 0.0;
  PhiStatus status = PhiStatus::Converged;
  SpectralInfo spectral;

  bool converged() const { return status == PhiStatus::Converged; }
};

/// Integrates dx/dt = -grad L(x) with classical fourth-order Runge-Kutta
/// until the gradient norm falls to tolerance. The step halves whenever a
/// trial step raises the loss and re-expands after a run of accepted steps,
/// capped at 2 / lambda1 for stability.
PhiResult estimate_phi(const LossModel& model, const Vector& x,
                       const PhiOptions& opts = {});

enum class ProjectionMethod : std::uint8_t { HessianEigvecs, PerExampleSpan };

/// Orthogonal projector onto the normal space of the zero-loss set at a
/// near-manifold point, with its complement. Backed either by the top-M
/// Hessian eigenvectors or by the span of per-example gradients solved
/// through regularized normal equations.
class NormalProjector {
 public:
  Vector normal(const Vector& v) const;      // P v
  Vector tangential(const Vector& v) const;  // v - P v

  Index normal_rank() const { return basis_.cols(); }

 private:
  friend NormalProjector normal_projection(const LossModel&, const Vector&,
                                           ProjectionMethod, Index, double);
  Matrix basis_;  // D x M, orthonormal columns spanning the normal space
};

NormalProjector normal_projection(const LossModel& model,
                                  const Vector& p_on_manifold,
                                  ProjectionMethod method,
                                  Index top_m = 0,  // 0: rank estimate
                                  double pinv_reg = 1e-10);

enum class TildeKind : std::uint8_t { Hessian, SqrtHessian };

/// Displacement-based observables relative to the manifold point Phi(x).
/// R and Rbar are the trailing-eigenspace displacement norms minus their
/// step-size thresholds; theta is the angle between the weighted
/// displacement and the top eigenvector; alignment is the normalized
/// Rayleigh quotient of the raw gradient at x.
struct ManifoldObservables {
  Vector R;          // size M
  Vector Rbar;       // size M
  double theta = 0.0;
  double G = 0.0;    // |<v1, tilde x>|
  double alignment = 0.0;
  double tilde_norm = 0.0;
  double lambda1_at_x = 0.0;
  Index rank = 0;
};

struct ObservablesOptions {
  TildeKind tilde_kind = TildeKind::Hessian;
  double rank_threshold = 1e-3;
  Index rank_override = 0;  // > 0 forces M
  PowerIterOptions eig;
  double lambda1_at_x = -1.0;  // < 0 computes it
};

ManifoldObservables observables(const LossModel& model, const Vector& x,
                                double eta, const PhiResult& phi,
                                const ObservablesOptions& opts = {});

}  // namespace eos
