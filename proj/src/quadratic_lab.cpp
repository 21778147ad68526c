#include "eoslab/quadratic_lab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace eos {
namespace quad {

void validate_eigenvalues(const Vector& lambdas) {
  if (lambdas.size() < 1) {
    throw std::invalid_argument("eigenvalue list is empty");
  }
  for (Index i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] > 0.0)) {
      throw std::invalid_argument("eigenvalues must be positive");
    }
    if (i > 0 && !(lambdas[i] <= lambdas[i - 1])) {
      throw std::invalid_argument("eigenvalues must be non-increasing");
    }
  }
  if (lambdas.size() >= 2 && !(lambdas[0] > lambdas[1])) {
    throw std::invalid_argument("top eigenvalue must be simple");
  }
}

std::optional<Vector> tilde_step(const Vector& lambdas, const Vector& xt) {
  const double n = xt.norm();
  if (n <= 1e-300) return std::nullopt;
  Vector out(xt.size());
  for (Index i = 0; i < xt.size(); ++i) {
    out[i] = (1.0 - lambdas[i] / n) * xt[i];
  }
  return out;
}

std::vector<Vector> run_tilde(const Vector& lambdas, const Vector& xt0,
                              long steps) {
  validate_eigenvalues(lambdas);
  if (xt0.size() != lambdas.size()) {
    throw std::invalid_argument("state and eigenvalue dimensions differ");
  }
  std::vector<Vector> trace;
  trace.reserve(steps + 1);
  trace.push_back(xt0);
  Vector x = xt0;
  for (long t = 0; t < steps; ++t) {
    auto next = tilde_step(lambdas, x);
    if (!next) break;
    x = std::move(*next);
    trace.push_back(x);
  }
  return trace;
}

LimitCycleReport detect_limit_cycle(const Vector& lambdas, const Vector& xt0,
                                    long max_steps, double tol) {
  validate_eigenvalues(lambdas);
  LimitCycleReport rep;
  if (std::abs(xt0[0]) < 1e-14) {
    rep.hypothesis_violated = true;
    return rep;
  }

  const double l1 = lambdas[0];
  const double inf = std::numeric_limits<double>::infinity();
  Vector x = xt0;
  Vector last_even = xt0;
  Vector last_odd;
  double even_move = inf, odd_move = inf;
  for (long t = 1; t <= max_steps; ++t) {
    auto next = tilde_step(lambdas, x);
    if (!next) break;
    x = std::move(*next);
    rep.steps_used = t;
    if (std::abs(x[0]) < 1e-14) {
      rep.hypothesis_violated = true;
      break;
    }
    if (t % 2 == 0) {
      even_move = (x - last_even).norm();
      last_even = x;
    } else {
      if (last_odd.size() > 0) odd_move = (x - last_odd).norm();
      last_odd = x;
    }
    if (even_move < tol && odd_move < tol) {
      rep.converged = true;
      break;
    }
  }
  rep.even_limit = last_even;
  rep.odd_limit = last_odd.size() ? last_odd : xt0;

  rep.s = last_even[0] >= 0.0 ? +1 : -1;
  rep.C = std::abs(last_even[0]) / l1;
  Vector target_even = Vector::Zero(xt0.size());
  target_even[0] = rep.C * rep.s * l1;
  Vector target_odd = Vector::Zero(xt0.size());
  target_odd[0] = (rep.C - 1.0) * rep.s * l1;
  rep.residual_even = (last_even - target_even).norm();
  rep.residual_odd = (rep.odd_limit - target_odd).norm();
  return rep;
}

double invariant_entry_bound(const Vector& lambdas, double xt0_norm, Index j) {
  // Two phases: the norm sheds lambda_D per step until it is at most
  // lambda_1, then the trailing block contracts by (1 - lambda_D / lambda_1)
  // per step until it fits inside the radius-lambda_j ball.
  const double l1 = lambdas[0];
  const double lj = lambdas[j];
  const double ld = lambdas[lambdas.size() - 1];
  return (l1 / ld) * std::log(l1 / lj) + std::max((xt0_norm - l1) / ld, 0.0);
}

ViolationReport check_invariant_sets(const Vector& lambdas,
                                     const std::vector<Vector>& trace,
                                     double tol) {
  validate_eigenvalues(lambdas);
  ViolationReport rep;
  if (trace.empty()) return rep;
  const double n0 = trace.front().norm();
  const Index d = lambdas.size();

  for (Index j = 0; j < d; ++j) {
    const double bound_step = invariant_entry_bound(lambdas, n0, j);
    const long start = static_cast<long>(std::ceil(bound_step));
    for (std::size_t t = static_cast<std::size_t>(std::max<long>(start, 0));
         t < trace.size(); ++t) {
      const double tail = trace[t].tail(d - j).norm();
      const double excess = tail - (lambdas[j] + tol);
      if (excess > 0.0) {
        ++rep.violations;
        rep.max_excess = std::max(rep.max_excess, excess);
        if (rep.first_step < 0) {
          rep.first_step = static_cast<long>(t);
          rep.first_index = static_cast<int>(j);
        }
      }
    }
  }
  return rep;
}

AlignmentReport check_alignment_lemmas(const Vector& lambdas,
                                       const std::vector<Vector>& trace,
                                       double tol) {
  validate_eigenvalues(lambdas);
  AlignmentReport rep;
  const double l1 = lambdas[0];
  const double ld = lambdas[lambdas.size() - 1];
  const double fallback = l1 / 2.0 - ld * ld / (2.0 * l1);

  for (std::size_t t = 0; t + 1 < trace.size(); ++t) {
    const double n = trace[t].norm();
    const double n_next = trace[t + 1].norm();
    if (n > l1 / 2.0) {
      const double bound = std::max(fallback, l1 - n);
      const double excess = n_next - (bound + tol);
      if (excess > 0.0) {
        ++rep.norm_drop_violations;
        rep.max_excess = std::max(rep.max_excess, excess);
      }
    } else {
      for (int k = 1; k <= 2; ++k) {
        if (t + k >= trace.size()) break;
        const double drop =
            std::abs(trace[t][0]) - std::abs(trace[t + k][0]) - tol;
        if (drop > 0.0) {
          ++rep.monotonicity_violations;
          rep.max_excess = std::max(rep.max_excess, drop);
        }
      }
    }
  }

  // Growth of |x_1| across the whole low-norm subsequence.
  double last_low = -1.0;
  for (const Vector& x : trace) {
    if (x.norm() <= l1 / 2.0) {
      const double c = std::abs(x[0]);
      if (last_low >= 0.0 && c < last_low - tol) {
        ++rep.subsequence_violations;
        rep.max_excess = std::max(rep.max_excess, last_low - c);
      }
      last_low = std::max(last_low, c);
    }
  }
  return rep;
}

double sqrt_quadratic_equivalence(const Vector& lambdas, const Vector& x0,
                                  double eta, long steps) {
  validate_eigenvalues(lambdas);
  const Index d = lambdas.size();
  if (x0.size() != d) {
    throw std::invalid_argument("state and eigenvalue dimensions differ");
  }

  const Vector root2a = (2.0 * lambdas).cwiseSqrt();
  auto map_to_tilde = [&](const Vector& x) {
    return Vector((root2a.cwiseProduct(x)) / eta);
  };

  Vector x = x0;
  Vector xt = map_to_tilde(x0);
  double max_dev = 0.0;
  for (long t = 0; t < steps; ++t) {
    // Descent step on sqrt(0.5 x^T A x), computed directly.
    const double q = x.dot(lambdas.cwiseProduct(x));  // x^T A x
    if (q <= 1e-300) break;
    const Vector grad_sqrt = lambdas.cwiseProduct(x) / std::sqrt(2.0 * q);
    x -= eta * grad_sqrt;

    auto next = tilde_step(lambdas, xt);
    if (!next) break;
    xt = std::move(*next);

    max_dev = std::max(max_dev, (map_to_tilde(x) - xt).norm());
  }
  return max_dev;
}

RandomInstance random_instance(std::uint64_t seed, Index dim, double lo,
                               double hi, double min_gap, double max_norm) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);

  RandomInstance inst;
  inst.lambdas.resize(dim);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<double> vals(dim);
    for (auto& v : vals) v = u(rng);
    std::sort(vals.rbegin(), vals.rend());
    bool ok = vals[0] - vals[1] >= min_gap;
    for (Index i = 0; i + 1 < dim && ok; ++i) {
      ok = vals[i] - vals[i + 1] >= 1e-3;  // keep the spectrum distinct
    }
    if (ok) {
      for (Index i = 0; i < dim; ++i) inst.lambdas[i] = vals[i];
      break;
    }
    if (attempt == 999) {
      throw std::runtime_error("random_instance: could not draw a spectrum");
    }
  }

  std::normal_distribution<double> unit(0.0, 1.0);
  inst.xt0.resize(dim);
  for (Index i = 0; i < dim; ++i) inst.xt0[i] = unit(rng);
  std::uniform_real_distribution<double> r01(0.05, 1.0);
  inst.xt0 *= max_norm * r01(rng) / inst.xt0.norm();
  return inst;
}

}  // namespace quad
}  // namespace eos
