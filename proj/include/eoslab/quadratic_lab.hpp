#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "eoslab/types.hpp"

namespace eos {

/// Exact normalized-descent dynamics on a positive-definite quadratic,
/// expressed in the eigenbasis. Everything here is an explicit map on the
/// rescaled state, so property tolerances are rounding-level.
namespace quad {

/// Eigenvalues in strictly descending order, all positive, top one simple.
void validate_eigenvalues(const Vector& lambdas);

/// One step of the rescaled dynamics: coordinate i is multiplied by
/// (1 - lambda_i / |xt|). Undefined (nullopt) at the origin.
std::optional<Vector> tilde_step(const Vector& lambdas, const Vector& xt);

/// Iterates tilde_step; the trace includes the initial state. Stops early
/// at an undefined update.
std::vector<Vector> run_tilde(const Vector& lambdas, const Vector& xt0,
                              long steps);

struct LimitCycleReport {
  double C = 0.0;   // in (0, 1) at convergence
  int s = +1;       // sign of the top coordinate on even steps
  double residual_even = 0.0;
  double residual_odd = 0.0;
  bool converged = false;
  bool hypothesis_violated = false;  // top coordinate numerically zero
  long steps_used = 0;
  Vector even_limit;  // last even iterate
  Vector odd_limit;   // last odd iterate
};

/// Detects the period-two limit of the rescaled dynamics: even iterates
/// approach C s lambda_1 e_1 and odd ones (C - 1) s lambda_1 e_1. Residuals
/// measure the distance of the final iterates from that structure.
LimitCycleReport detect_limit_cycle(const Vector& lambdas, const Vector& xt0,
                                    long max_steps = 100000,
                                    double tol = 1e-12);

struct ViolationReport {
  long violations = 0;
  long first_step = -1;
  int first_index = -1;
  double max_excess = 0.0;  // worst overshoot beyond the asserted bound
};

/// Entry bound after which the trailing-block ball of radius lambda_j must
/// hold: (l1/lD) ln(l1/lj) + max((|xt0| - l1)/lD, 0).
double invariant_entry_bound(const Vector& lambdas, double xt0_norm, Index j);

/// Checks |P_j xt(t)| <= lambda_j + tol for every j and every step past the
/// entry bound, where P_j projects onto coordinates j..D.
ViolationReport check_invariant_sets(const Vector& lambdas,
                                     const std::vector<Vector>& trace,
                                     double tol = 1e-12);

struct AlignmentReport {
  long norm_drop_violations = 0;       // large-norm steps must fall back
  long monotonicity_violations = 0;    // one- and two-step growth of |x_1|
  long subsequence_violations = 0;     // growth across the low-norm subsequence
  double max_excess = 0.0;
};

/// Checks the norm-drop bound for steps with |xt| > lambda_1 / 2 and the
/// monotone growth of the top coordinate on the low-norm steps, both with
/// rounding tolerance. The trace must already lie inside all invariant
/// balls; pass the tail of a run past the entry bound.
AlignmentReport check_alignment_lemmas(const Vector& lambdas,
                                       const std::vector<Vector>& trace,
                                       double tol = 1e-12);

/// Runs gradient descent on sqrt(0.5 x^T A x) from x0 and the rescaled
/// dynamics from the mapped start (1/eta) (2A)^{1/2} x0, A = diag(lambdas),
/// and returns the largest per-step distance between the mapped iterates
/// and the rescaled ones. Comparison truncates if either update becomes
/// undefined.
double sqrt_quadratic_equivalence(const Vector& lambdas, const Vector& x0,
                                  double eta, long steps);

struct RandomInstance {
  Vector lambdas;
  Vector xt0;
};

/// Seeded instance with distinct eigenvalues in [lo, hi], a top gap of at
/// least min_gap and |xt0| <= max_norm.
RandomInstance random_instance(std::uint64_t seed, Index dim, double lo = 0.2,
                               double hi = 1.0, double min_gap = 0.05,
                               double max_norm = 3.0);

}  // namespace quad

}  // namespace eos
