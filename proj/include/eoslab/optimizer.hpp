#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "eoslab/loss.hpp"
#include "eoslab/manifold.hpp"
#include "eoslab/types.hpp"

namespace eos {

enum class StepKind : std::uint8_t { GD, NormalizedGD, SqrtLossGD };

const char* to_string(StepKind kind);

/// Plain step x - eta * grad L(x).
Vector gd_step(const LossModel& model, const Vector& x, double eta);

/// Step of fixed length eta along the negative gradient direction.
/// Undefined (nullopt) where the gradient vanishes.
std::optional<Vector> normalized_gd_step(const LossModel& model,
                                         const Vector& x, double eta);

/// Step x - eta * grad sqrt(L), i.e. x - eta * grad L / (2 sqrt(L)).
/// Undefined (nullopt) at the loss floor.
std::optional<Vector> sqrt_loss_gd_step(const LossModel& model,
                                        const Vector& x, double eta);

/// Occasional uniform-ball perturbation added after the base update.
struct NoiseSchedule {
  bool enabled = false;
  long t_freq = 0;       // 0 picks ceil(eta^-0.1)
  double radius = -1.0;  // < 0 picks 1e-8 * eta
  std::uint64_t seed = 0;

  long effective_t_freq(double eta) const;
  double effective_radius(double eta) const;
};

/// Deterministic sampler for the perturbation sequence.
class BallNoise {
 public:
  BallNoise(Index dim, double radius, std::uint64_t seed);
  Vector sample();  // uniform in the ball of the configured radius

 private:
  Index dim_;
  double radius_;
  std::mt19937_64 rng_;
};

struct DiagnosticsConfig {
  Index top_k = 2;
  double rank_threshold = 1e-3;
  Index rank_override = 0;
  bool with_stableness = false;
  int stableness_grid = 16;
  PhiOptions phi;
};

struct RunConfig {
  StepKind kind = StepKind::NormalizedGD;
  double eta = 0.0;
  long steps = 0;
  long diag_every = 0;  // 0 disables diagnostics
  NoiseSchedule noise;
  DiagnosticsConfig diagnostics;
};

/// One row of a trace. Diagnostic fields hold NaN until a diagnosed step
/// fills them.
struct TraceRecord {
  long step = 0;
  double loss = 0.0;
  double sqrt_loss = 0.0;
  double grad_norm = 0.0;
  double eta_effective = 0.0;
  bool noise_applied = false;

  bool diagnosed = false;
  double lambda1_at_x = 0.0;
  double lambda1_at_phi = 0.0;
  ManifoldObservables obs;
  double stableness = 0.0;
  double stableness_lb = 0.0;
  bool stableness_flagged = false;
};

struct Trace {
  std::vector<TraceRecord> records;
  std::vector<Vector> iterates;  // one per record, same indexing
  bool undefined_update_stop = false;  // update rule hit a critical point
  bool nonfinite_abort = false;        // iterate left the finite range

  StepKind kind = StepKind::GD;
  double eta = 0.0;
  Index max_rank_columns = 0;  // R_j columns carried by the CSV schema
};

/// Drives `steps` updates of the chosen rule from x0, recording one row per
/// step (plus the initial state) and full manifold diagnostics every
/// diag_every steps. An undefined update terminates the trace with a marker
/// instead of failing; a non-finite iterate aborts with a diagnostic flag.
Trace run(const LossModel& model, const RunConfig& cfg, const Vector& x0);

}  // namespace eos
