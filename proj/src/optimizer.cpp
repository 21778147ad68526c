#include "eoslab/optimizer.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "eoslab/stableness.hpp"

namespace eos {

const char* to_string(StepKind kind) {
  switch (kind) {
    case StepKind::GD: return "gd";
    case StepKind::NormalizedGD: return "normalized_gd";
    case StepKind::SqrtLossGD: return "sqrt_gd";
  }
  return "unknown";
}

Vector gd_step(const LossModel& model, const Vector& x, double eta) {
  return x - eta * model.gradient(x);
}

std::optional<Vector> normalized_gd_step(const LossModel& model,
                                         const Vector& x, double eta) {
  const Vector g = model.gradient(x);
  const double gn = g.norm();
  if (gn <= 1e-300) return std::nullopt;
  return x - (eta / gn) * g;
}

std::optional<Vector> sqrt_loss_gd_step(const LossModel& model,
                                        const Vector& x, double eta) {
  const double v = model.value(x);
  if (v <= kLossFloor) return std::nullopt;
  return x - (eta / (2.0 * std::sqrt(v))) * model.gradient(x);
}

long NoiseSchedule::effective_t_freq(double eta) const {
  if (t_freq > 0) return t_freq;
  return static_cast<long>(std::ceil(std::pow(eta, -0.1)));
}

double NoiseSchedule::effective_radius(double eta) const {
  return radius >= 0.0 ? radius : 1e-8 * eta;
}

BallNoise::BallNoise(Index dim, double radius, std::uint64_t seed)
    : dim_(dim), radius_(radius), rng_(seed) {}

Vector BallNoise::sample() {
  std::normal_distribution<double> unit(0.0, 1.0);
  Vector dir(dim_);
  for (Index i = 0; i < dim_; ++i) dir[i] = unit(rng_);
  const double n = dir.norm();
  if (n < 1e-300) return Vector::Zero(dim_);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double r =
      radius_ * std::pow(u01(rng_), 1.0 / static_cast<double>(dim_));
  return (r / n) * dir;
}

namespace {

double effective_eta(StepKind kind, double eta, double grad_norm,
                     double loss) {
  switch (kind) {
    case StepKind::GD:
      return eta;
    case StepKind::NormalizedGD:
      return grad_norm > 1e-300 ? eta / grad_norm
                                : std::numeric_limits<double>::infinity();
    case StepKind::SqrtLossGD:
      return loss > kLossFloor ? eta / (2.0 * std::sqrt(loss))
                               : std::numeric_limits<double>::infinity();
  }
  return eta;
}

void diagnose(const LossModel& model, const Vector& x, const RunConfig& cfg,
              TraceRecord& rec) {
  const DiagnosticsConfig& dc = cfg.diagnostics;
  const SpectralInfo at_x = top_eigenpairs(model, x, 1, dc.phi.eig);
  rec.lambda1_at_x = at_x.lambda1();

  const PhiResult phi = estimate_phi(model, x, dc.phi);
  rec.lambda1_at_phi = phi.spectral.lambda1();

  ObservablesOptions oo;
  oo.tilde_kind = cfg.kind == StepKind::SqrtLossGD ? TildeKind::SqrtHessian
                                                   : TildeKind::Hessian;
  oo.rank_threshold = dc.rank_threshold;
  oo.rank_override = dc.rank_override;
  oo.eig = dc.phi.eig;
  oo.lambda1_at_x = rec.lambda1_at_x;
  rec.obs = observables(model, x, cfg.eta, phi, oo);

  if (dc.with_stableness) {
    const double eta_eff = rec.eta_effective;
    if (std::isfinite(eta_eff) && rec.grad_norm > 1e-300) {
      StablenessResult s =
          stableness(model, x, eta_eff, dc.stableness_grid, dc.phi.eig);
      rec.stableness = s.value;
      rec.stableness_lb = s.lower_bound;
      rec.stableness_flagged = s.eig_flagged;
    }
  }
  rec.diagnosed = true;
}

}  // namespace

Trace run(const LossModel& model, const RunConfig& cfg, const Vector& x0) {
  if (cfg.steps < 1) throw std::invalid_argument("run: steps must be >= 1");
  if (!(cfg.eta > 0.0)) throw std::invalid_argument("run: eta must be > 0");

  Trace trace;
  trace.kind = cfg.kind;
  trace.eta = cfg.eta;
  trace.max_rank_columns = cfg.diagnostics.top_k;
  trace.records.reserve(cfg.steps + 1);
  trace.iterates.reserve(cfg.steps + 1);

  const long t_freq =
      cfg.noise.enabled ? cfg.noise.effective_t_freq(cfg.eta) : 0;
  BallNoise noise(model.dim(), cfg.noise.effective_radius(cfg.eta),
                  cfg.noise.seed);

  Vector x = x0;
  auto record_state = [&](long t, bool noise_applied) {
    TraceRecord rec;
    rec.step = t;
    rec.loss = model.value(x);
    rec.sqrt_loss = sqrt_loss(model, x);
    rec.grad_norm = model.gradient(x).norm();
    rec.eta_effective = effective_eta(cfg.kind, cfg.eta, rec.grad_norm, rec.loss);
    rec.noise_applied = noise_applied;
    if (cfg.diag_every > 0 && t % cfg.diag_every == 0) {
      diagnose(model, x, cfg, rec);
    }
    trace.records.push_back(std::move(rec));
    trace.iterates.push_back(x);
  };

  record_state(0, false);

  for (long t = 1; t <= cfg.steps; ++t) {
    std::optional<Vector> next;
    switch (cfg.kind) {
      case StepKind::GD:
        next = gd_step(model, x, cfg.eta);
        break;
      case StepKind::NormalizedGD:
        next = normalized_gd_step(model, x, cfg.eta);
        break;
      case StepKind::SqrtLossGD:
        next = sqrt_loss_gd_step(model, x, cfg.eta);
        break;
    }
    if (!next) {
      trace.undefined_update_stop = true;
      break;
    }
    bool noise_applied = false;
    if (cfg.noise.enabled && t_freq > 0 && t % t_freq == 0) {
      *next += noise.sample();
      noise_applied = true;
    }
    if (!next->allFinite()) {
      trace.nonfinite_abort = true;
      break;
    }
    x = std::move(*next);
    record_state(t, noise_applied);
  }
  return trace;
}

}  // namespace eos
