#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eoslab/loss.hpp"
#include "eoslab/manifold.hpp"
#include "eoslab/optimizer.hpp"
#include "eoslab/types.hpp"

namespace eos {

enum class FlowKind : std::uint8_t { LogSharpness, Sharpness };

const char* to_string(FlowKind kind);

struct ProjectionConfig {
  ProjectionMethod method = ProjectionMethod::HessianEigvecs;
  Index top_m = 0;           // 0: rank estimate
  double pinv_reg = 1e-10;
  double eta_proj = 1e-2;
  long t_proj = 1000;
  double tol_manifold = 1e-9;  // residual gradient norm after re-projection
};

struct FlowState {
  Vector x;
  double tau = 0.0;
  double lambda1 = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;
  FlowKind kind = FlowKind::LogSharpness;
  bool eigengap_warning = false;
};

/// Default drift coefficient reproducing the continuous sharpness-reduction
/// flows this integrator discretizes: 1/4 for the log flow, 1/8 for the
/// plain flow. A coefficient of 1 gives the raw tangential update used when
/// pairing flow time with discrete optimizer steps.
double default_flow_coefficient(FlowKind kind);

/// One Euler step of the on-manifold flow: top eigenpair at x, gradient of
/// the top eigenvalue, tangential projection, a step of length
/// eta_flow * coefficient along it (divided by lambda1 for the log flow),
/// then descent steps back to the manifold. Time advances by eta_flow.
/// Throws if re-projection cannot reach tol_manifold.
FlowState flow_step(const LossModel& model, const FlowState& state,
                    double eta_flow, const ProjectionConfig& proj,
                    double coefficient, const PowerIterOptions& eig = {});

struct FlowOptions {
  FlowKind kind = FlowKind::LogSharpness;
  double eta_flow = 1e-3;
  double tau_end = 1.0;
  double coefficient = -1.0;  // < 0 picks default_flow_coefficient(kind)
  ProjectionConfig proj;
  PowerIterOptions eig;
  PhiOptions phi;  // used for the initial projection of x0
};

/// Integrates the flow from x0 (projected onto the manifold first) until
/// tau reaches tau_end. Returns every state including the initial one.
std::vector<FlowState> integrate_flow(const LossModel& model, const Vector& x0,
                                      const FlowOptions& opts);

struct ComparisonSample {
  double tau = 0.0;
  long gd_step = 0;
  double abs_distance = 0.0;  // | Phi(gd iterate) - flow point |
  double rel_distance = 0.0;
  bool valid = true;
};

struct ComparisonReport {
  std::vector<ComparisonSample> samples;
  double c_time = 0.0;
  std::string convention;
  double max_abs_distance = 0.0;
  double max_rel_distance = 0.0;
};

struct CompareOptions {
  double c_time = -1.0;  // < 0: 1/4 for normalized descent, 1/8 for sqrt
  int n_samples = 21;
  PhiOptions phi;
};

/// Pairs flow time tau with the optimizer step t satisfying
/// tau = c_time * t * eta^2, estimates the manifold point of that iterate
/// and reports distances. Expects the flow trace integrated with
/// coefficient 1 so both clocks run at the conventional rate.
ComparisonReport compare_trajectories(const LossModel& model,
                                      const std::vector<FlowState>& flow_trace,
                                      const Trace& gd_trace,
                                      const CompareOptions& opts = {});

}  // namespace eos
