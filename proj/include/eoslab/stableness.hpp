#pragma once

#include <vector>

#include "eoslab/loss.hpp"
#include "eoslab/optimizer.hpp"
#include "eoslab/spectral.hpp"

namespace eos {

/// Cap applied to stableness values measured on the square-root landscape,
/// whose Hessian is singular across the zero-loss set.
inline constexpr double kStablenessCap = 1e6;

struct StablenessResult {
  double value = 0.0;        // eta_eff times the segment supremum of lambda1
  double lower_bound = 0.0;  // eta_eff times lambda1 at the base point
  int grid_points = 0;
  double argmax_s = 0.0;
  bool eig_flagged = false;  // an eigen solve along the segment failed
};

/// Segment supremum of sharpness scaled by the step size: evaluates the top
/// Hessian eigenvalue at grid_n + 1 equispaced points on the raw-gradient
/// ray x - s grad L(x), s in [0, eta_eff]. Values at or below 2 mean the
/// classical descent step applies throughout the segment.
StablenessResult stableness(const LossModel& model, const Vector& x,
                            double eta_eff, int grid_n = 16,
                            const PowerIterOptions& eig = {});

struct SqrtStablenessResult {
  double value = 0.0;  // capped at kStablenessCap
  bool diverged = false;
  double argmax_s = 0.0;
};

/// Stableness of the square-root landscape at (x, eta): the segment runs
/// along grad sqrt(L). The supremum genuinely diverges when the segment
/// crosses the zero-loss set, so the grid maximum is refined locally until
/// it either settles or passes the cap, which raises the divergence flag.
SqrtStablenessResult sqrt_stableness(const LossModel& model, const Vector& x,
                                     double eta, int grid_n = 16,
                                     const PowerIterOptions& eig = {});

/// Per-pair comparison of two-step oscillation identities over consecutive
/// trace steps.
struct EosPairRecord {
  long step = 0;  // the earlier step of the pair
  double inv_stableness_sum = 0.0;   // 1/S_t + 1/S_{t+1}, normalized-descent LR
  double sqrt_two_step_sum = 0.0;    // sqrt L_t + sqrt L_{t+1}
  double predicted_rhs = 0.0;        // eta sqrt(lambda1/2) or eta lambda1
  double ratio = 0.0;                // sqrt sum over prediction
  double sqrt_stableness_value = 0.0;  // square-root landscape only
  bool sqrt_stableness_diverged = false;
};

struct EosReportOptions {
  int grid_n = 16;
  long first_step = 0;  // skip pairs before this step
  long last_step = -1;  // inclusive, -1 means the whole trace
  PowerIterOptions eig;
};

/// Walks consecutive iterate pairs of a trace and emits the two-step
/// records appropriate for the trace's update rule. Pairs interrupted by a
/// terminal marker are skipped.
std::vector<EosPairRecord> eos_two_step_report(const LossModel& model,
                                               const Trace& trace,
                                               const EosReportOptions& opts = {});

}  // namespace eos
