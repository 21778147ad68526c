#include "eoslab/flow.hpp"

#include <cmath>
#include <stdexcept>

namespace eos {

const char* to_string(FlowKind kind) {
  switch (kind) {
    case FlowKind::LogSharpness: return "log_flow";
    case FlowKind::Sharpness: return "plain_flow";
  }
  return "unknown";
}

double default_flow_coefficient(FlowKind kind) {
  return kind == FlowKind::LogSharpness ? 0.25 : 0.125;
}

namespace {

// Descent back to the zero-loss set after a tangential step. Plain descent
// steps at eta_proj, stopping early once the residual passes tolerance.
Vector reproject(const LossModel& model, Vector y,
                 const ProjectionConfig& proj) {
  for (long t = 0; t < proj.t_proj; ++t) {
    const Vector g = model.gradient(y);
    if (g.norm() <= proj.tol_manifold) return y;
    y -= proj.eta_proj * g;
  }
  const double resid = model.gradient(y).norm();
  if (resid > proj.tol_manifold) {
    throw std::runtime_error(
        "flow_step: re-projection stalled at residual gradient norm " +
        std::to_string(resid));
  }
  return y;
}

}  // namespace

FlowState flow_step(const LossModel& model, const FlowState& state,
                    double eta_flow, const ProjectionConfig& proj,
                    double coefficient, const PowerIterOptions& eig) {
  const Index k = std::min<Index>(model.dim(), 2);
  const SpectralInfo sp = top_eigenpairs(model, state.x, k, eig);
  const double lam1 = sp.lambda1();
  if (!(lam1 > 0.0)) {
    throw std::runtime_error("flow_step: sharpness is not positive");
  }

  const EigGradResult dg =
      grad_top_eigenvalue(model, state.x, sp.v1(), &sp, eig.tol);

  const NormalProjector np =
      normal_projection(model, state.x, proj.method, proj.top_m, proj.pinv_reg);
  Vector drift = np.tangential(dg.grad);
  if (state.kind == FlowKind::LogSharpness) drift /= lam1;

  Vector y = state.x - eta_flow * coefficient * drift;
  y = reproject(model, y, proj);

  FlowState next;
  next.x = std::move(y);
  next.tau = state.tau + eta_flow;
  next.kind = state.kind;
  next.eigengap_warning = dg.degenerate_warning;
  const SpectralInfo sp_next = top_eigenpairs(model, next.x, 1, eig);
  next.lambda1 = sp_next.lambda1();
  next.loss = model.value(next.x);
  next.grad_norm = model.gradient(next.x).norm();
  return next;
}

std::vector<FlowState> integrate_flow(const LossModel& model, const Vector& x0,
                                      const FlowOptions& opts) {
  const double coeff = opts.coefficient >= 0.0
                           ? opts.coefficient
                           : default_flow_coefficient(opts.kind);

  PhiResult start = estimate_phi(model, x0, opts.phi);
  if (!start.converged()) {
    throw std::runtime_error("integrate_flow: could not reach the manifold");
  }

  FlowState s;
  s.x = start.phi;
  s.tau = 0.0;
  s.kind = opts.kind;
  s.lambda1 = start.spectral.lambda1();
  s.loss = start.value_at_phi;
  s.grad_norm = start.residual_grad_norm;

  std::vector<FlowState> trace;
  trace.push_back(s);
  const long n_steps = std::lround(opts.tau_end / opts.eta_flow);
  for (long i = 0; i < n_steps; ++i) {
    s = flow_step(model, s, opts.eta_flow, opts.proj, coeff, opts.eig);
    trace.push_back(s);
  }
  return trace;
}

ComparisonReport compare_trajectories(const LossModel& model,
                                      const std::vector<FlowState>& flow_trace,
                                      const Trace& gd_trace,
                                      const CompareOptions& opts) {
  if (flow_trace.empty() || gd_trace.records.empty()) {
    throw std::invalid_argument("compare_trajectories: empty trace");
  }

  ComparisonReport rep;
  rep.c_time = opts.c_time > 0.0
                   ? opts.c_time
                   : (gd_trace.kind == StepKind::SqrtLossGD ? 0.125 : 0.25);
  rep.convention =
      "tau = c_time * step * eta^2 with c_time = " + std::to_string(rep.c_time) +
      "; flow integrated with unit coefficient";

  const double eta = gd_trace.eta;
  const double tau_max = flow_trace.back().tau;
  const long gd_last = gd_trace.records.back().step;

  const int n = std::max(opts.n_samples, 2);
  for (int i = 0; i < n; ++i) {
    const double tau = tau_max * static_cast<double>(i) / (n - 1);
    const long t = std::lround(tau / (rep.c_time * eta * eta));
    if (t > gd_last) break;

    // Nearest flow state at or before tau.
    std::size_t fi = 0;
    while (fi + 1 < flow_trace.size() && flow_trace[fi + 1].tau <= tau + 1e-15) {
      ++fi;
    }

    ComparisonSample sample;
    sample.tau = tau;
    sample.gd_step = t;
    const PhiResult phi =
        estimate_phi(model, gd_trace.iterates[static_cast<std::size_t>(t)],
                     opts.phi);
    if (!phi.converged()) {
      sample.valid = false;
      rep.samples.push_back(sample);
      continue;
    }
    const Vector& flow_x = flow_trace[fi].x;
    sample.abs_distance = (phi.phi - flow_x).norm();
    sample.rel_distance =
        sample.abs_distance / std::max(1e-300, flow_x.norm());
    rep.samples.push_back(sample);
    rep.max_abs_distance = std::max(rep.max_abs_distance, sample.abs_distance);
    rep.max_rel_distance = std::max(rep.max_rel_distance, sample.rel_distance);
  }
  return rep;
}

}  // namespace eos
