#pragma once

#include <vector>

#include "eoslab/loss.hpp"
#include "eoslab/types.hpp"

namespace eos {

/// Leading eigenpairs of a Hessian, extracted matrix-free.
struct SpectralInfo {
  Vector eigenvalues;   // descending, size k
  Matrix eigenvectors;  // D x k, unit columns, deterministic sign
  Index rank_estimate = 0;
  bool converged = true;       // false if any pair hit the iteration cap
  double last_residual = 0.0;  // Rayleigh residual of the worst pair
  bool degenerate = false;     // top eigenvalue at or below tolerance

  double lambda1() const { return eigenvalues.size() ? eigenvalues[0] : 0.0; }
  Vector v1() const { return eigenvectors.col(0); }
  double eigengap() const {
    return eigenvalues.size() >= 2 ? eigenvalues[0] - eigenvalues[1]
                                   : eigenvalues.size() ? eigenvalues[0] : 0.0;
  }
};

struct PowerIterOptions {
  double tol = 1e-10;
  int max_iters = 10000;
  std::uint64_t seed = 0x5eedULL;  // deterministic start vector
};

/// Top-k eigenpairs of the Hessian at x by power iteration on the
/// Hessian-vector product, peeling one pair at a time with Hotelling
/// deflation. Convergence is declared when successive Rayleigh quotients
/// differ by at most tol * (1 + |lambda|). Eigenvalues are the Rayleigh
/// quotients of the undeflated operator. The sign of each eigenvector is
/// fixed so its first coordinate of magnitude above 1e-12 is positive.
SpectralInfo top_eigenpairs(const LossModel& model, const Vector& x, Index k,
                            const PowerIterOptions& opts = {});

/// Count of eigenvalues at or above threshold_ratio times the top one.
/// Zero means a numerically degenerate (flat) Hessian.
Index estimate_rank(const SpectralInfo& info, double threshold_ratio = 1e-3);

struct EigGradResult {
  Vector grad;                     // gradient of the top eigenvalue at x
  bool degenerate_warning = false; // eigengap too small for a reliable value
};

/// Gradient of the top Hessian eigenvalue, d3L(x)[v1, v1, .]. Uses the
/// model's analytic third-order oracle when present, otherwise central
/// differences of v1 . H(y) v1 with v1 held fixed. A warning is attached
/// when the eigengap of `at` is below 10 * tol.
EigGradResult grad_top_eigenvalue(const LossModel& model, const Vector& x,
                                  const Vector& v1,
                                  const SpectralInfo* at = nullptr,
                                  double tol = 1e-10);

}  // namespace eos
