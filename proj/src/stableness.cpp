#include "eoslab/stableness.hpp"

#include <cmath>
#include <limits>

namespace eos {

namespace {

// Loss view of the square-root landscape: value, gradient and
// Hessian-vector product of sqrt(L) derived from the base model.
class SqrtView final : public LossModel {
 public:
  explicit SqrtView(const LossModel& base) : base_(base) {}

  Index dim() const override { return base_.dim(); }

  double value(const Vector& x) const override { return sqrt_loss(base_, x); }

  Vector gradient(const Vector& x) const override {
    const double v = base_.value(x);
    if (v <= kLossFloor) {
      return Vector::Constant(dim(), std::numeric_limits<double>::quiet_NaN());
    }
    return base_.gradient(x) / (2.0 * std::sqrt(v));
  }

  Vector hvp(const Vector& x, const Vector& v) const override {
    const double val = base_.value(x);
    if (val <= kLossFloor) {
      return Vector::Constant(dim(), std::numeric_limits<double>::quiet_NaN());
    }
    const double s = std::sqrt(val);
    const Vector g = base_.gradient(x);
    return base_.hvp(x, v) / (2.0 * s) - g * (g.dot(v) / (4.0 * val * s));
  }

 private:
  const LossModel& base_;
};

double lambda1_at(const LossModel& model, const Vector& y,
                  const PowerIterOptions& eig, bool& flagged) {
  if (!y.allFinite()) {
    flagged = true;
    return std::numeric_limits<double>::infinity();
  }
  const SpectralInfo info = top_eigenpairs(model, y, 1, eig);
  if (!info.converged) flagged = true;
  return info.lambda1();
}

}  // namespace

StablenessResult stableness(const LossModel& model, const Vector& x,
                            double eta_eff, int grid_n,
                            const PowerIterOptions& eig) {
  if (grid_n < 1) throw std::invalid_argument("stableness: grid_n must be >= 1");
  const Vector g = model.gradient(x);
  if (g.norm() <= 1e-300) {
    throw std::invalid_argument("stableness: gradient vanishes at x");
  }

  StablenessResult res;
  res.grid_points = grid_n + 1;
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= grid_n; ++i) {
    const double s = eta_eff * static_cast<double>(i) / grid_n;
    bool flagged = false;
    const double lam = lambda1_at(model, x - s * g, eig, flagged);
    res.eig_flagged = res.eig_flagged || flagged;
    if (i == 0) res.lower_bound = eta_eff * lam;
    if (lam > best) {
      best = lam;
      res.argmax_s = s;
    }
  }
  res.value = eta_eff * best;
  return res;
}

SqrtStablenessResult sqrt_stableness(const LossModel& model, const Vector& x,
                                     double eta, int grid_n,
                                     const PowerIterOptions& eig) {
  SqrtView view(model);
  const double v0 = model.value(x);
  SqrtStablenessResult res;
  if (v0 <= kLossFloor) {
    res.value = kStablenessCap;
    res.diverged = true;
    return res;
  }
  const Vector g = view.gradient(x);

  auto loss_at = [&](double s) { return model.value(x - s * g); };
  auto lam_at = [&](double s) {
    if (loss_at(s) <= kLossFloor) {
      return std::numeric_limits<double>::infinity();
    }
    bool flagged = false;
    return lambda1_at(view, x - s * g, eig, flagged);
  };

  // Coarse grid over the segment.
  std::vector<double> losses(grid_n + 1);
  double best = -std::numeric_limits<double>::infinity();
  double best_s = 0.0;
  double loss_max = 0.0;
  for (int i = 0; i <= grid_n; ++i) {
    const double s = eta * static_cast<double>(i) / grid_n;
    losses[i] = loss_at(s);
    loss_max = std::max(loss_max, losses[i]);
    const double lam = lam_at(s);
    if (lam > best) {
      best = lam;
      best_s = s;
    }
  }

  // The supremum is genuinely unbounded exactly when the segment touches
  // the zero-loss set: across it the square-root landscape has a kink (or,
  // with a wider normal space, a 1/sqrt(L) blow-up). Around an interior
  // minimum the loss is locally quadratic, so the parabolic vertex against
  // the bracketing values separates a crossing (vertex much smaller than
  // its neighbors) from a genuine positive closest approach (vertex
  // comparable to them). Inconclusive brackets are refined.
  (void)loss_max;
  int mi = 0;
  for (int i = 1; i <= grid_n; ++i) {
    if (losses[i] < losses[mi]) mi = i;
  }
  if (mi > 0 && mi < grid_n) {
    double lo = eta * static_cast<double>(mi - 1) / grid_n;
    double hi = eta * static_cast<double>(mi + 1) / grid_n;
    for (int round = 0; round < 12; ++round) {
      constexpr int kInner = 8;
      double l[kInner + 1];
      int j = 1;
      for (int i = 0; i <= kInner; ++i) {
        l[i] = loss_at(lo + (hi - lo) * static_cast<double>(i) / kInner);
        if (i > 0 && l[i] < l[j]) j = i;
      }
      if (j == 0) j = 1;
      if (j == kInner) j = kInner - 1;
      const double a = l[j - 1], b = l[j], c = l[j + 1];
      const double curv = a - 2.0 * b + c;
      double vertex = b;
      if (curv > 0.0) {
        vertex = std::max(0.0, b - (c - a) * (c - a) / (8.0 * curv));
      }
      const double scale = std::max(a, c);
      if (scale <= kLossFloor || vertex <= 1e-4 * scale) {
        res.diverged = true;
        res.argmax_s = lo + (hi - lo) * static_cast<double>(j) / kInner;
        res.value = kStablenessCap;
        return res;
      }
      if (vertex >= 0.2 * scale) break;  // bounded closest approach
      const double w = (hi - lo) / kInner;
      lo = std::max(0.0, lo + (j - 1) * w);
      hi = std::min(eta, lo + 2.0 * w);
    }
  }

  // Bounded case: refine around the maximizer until it settles or passes
  // the cap.
  double spacing = eta / grid_n;
  for (int round = 0; round < 25 && eta * best < kStablenessCap; ++round) {
    const double lo = std::max(0.0, best_s - spacing);
    const double hi = std::min(eta, best_s + spacing);
    const int inner = 8;
    const double prev_best = best;
    for (int i = 0; i <= inner; ++i) {
      const double s = lo + (hi - lo) * static_cast<double>(i) / inner;
      const double lam = lam_at(s);
      if (lam > best) {
        best = lam;
        best_s = s;
      }
    }
    spacing = (hi - lo) / inner;
    if (best <= prev_best * (1.0 + 1e-2)) break;  // settled
  }

  res.argmax_s = best_s;
  if (!(eta * best < kStablenessCap)) {
    res.value = kStablenessCap;
    res.diverged = true;
  } else {
    res.value = eta * best;
  }
  return res;
}

std::vector<EosPairRecord> eos_two_step_report(const LossModel& model,
                                               const Trace& trace,
                                               const EosReportOptions& opts) {
  std::vector<EosPairRecord> out;
  const long last = opts.last_step < 0
                        ? static_cast<long>(trace.records.size()) - 1
                        : opts.last_step;
  for (std::size_t i = 0; i + 1 < trace.records.size(); ++i) {
    const TraceRecord& a = trace.records[i];
    const TraceRecord& b = trace.records[i + 1];
    if (a.step < opts.first_step || b.step > last) continue;
    if (b.step != a.step + 1) continue;
    if (!std::isfinite(a.loss) || !std::isfinite(b.loss)) continue;

    const Vector& xa = trace.iterates[i];
    const Vector& xb = trace.iterates[i + 1];

    EosPairRecord rec;
    rec.step = a.step;
    rec.sqrt_two_step_sum = a.sqrt_loss + b.sqrt_loss;

    const double lam1_a =
        top_eigenpairs(model, xa, 1, opts.eig).lambda1();

    if (trace.kind == StepKind::NormalizedGD) {
      if (a.grad_norm <= 1e-300 || b.grad_norm <= 1e-300) continue;
      const double sa =
          stableness(model, xa, trace.eta / a.grad_norm, opts.grid_n, opts.eig)
              .value;
      const double sb =
          stableness(model, xb, trace.eta / b.grad_norm, opts.grid_n, opts.eig)
              .value;
      rec.inv_stableness_sum = 1.0 / sa + 1.0 / sb;
      rec.predicted_rhs = trace.eta * std::sqrt(std::max(lam1_a, 0.0) / 2.0);
    } else if (trace.kind == StepKind::SqrtLossGD) {
      const SqrtStablenessResult ss =
          sqrt_stableness(model, xa, trace.eta, opts.grid_n, opts.eig);
      rec.sqrt_stableness_value = ss.value;
      rec.sqrt_stableness_diverged = ss.diverged;
      rec.predicted_rhs = trace.eta * lam1_a;
    } else {
      continue;
    }
    rec.ratio =
        rec.predicted_rhs > 0.0 ? rec.sqrt_two_step_sum / rec.predicted_rhs : 0.0;
    out.push_back(rec);
  }
  return out;
}

}  // namespace eos
