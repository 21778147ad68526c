#include "eoslab/spectral.hpp"

#include <cmath>
#include <random>

namespace eos {

namespace {

Vector seeded_unit_vector(Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  Vector v(d);
  for (Index i = 0; i < d; ++i) v[i] = unit(rng);
  const double n = v.norm();
  return n > 0 ? Vector(v / n) : Vector(Vector::Unit(d, 0));
}

void fix_sign(Eigen::Ref<Vector> v) {
  for (Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > 1e-12) {
      if (v[i] < 0.0) v = -v;
      return;
    }
  }
}

}  // namespace

SpectralInfo top_eigenpairs(const LossModel& model, const Vector& x, Index k,
                            const PowerIterOptions& opts) {
  const Index d = model.dim();
  if (k < 1 || k > d) {
    throw std::invalid_argument("top_eigenpairs: k must be in [1, dim]");
  }

  SpectralInfo info;
  info.eigenvalues.resize(k);
  info.eigenvectors.resize(d, k);

  for (Index i = 0; i < k; ++i) {
    // Operator with previously found pairs deflated out.
    auto apply = [&](const Vector& v) {
      Vector hv = model.hvp(x, v);
      for (Index j = 0; j < i; ++j) {
        hv -= info.eigenvalues[j] * info.eigenvectors.col(j).dot(v) *
              info.eigenvectors.col(j);
      }
      return hv;
    };
    auto orthogonalize = [&](Vector& v) {
      for (Index j = 0; j < i; ++j) {
        v -= info.eigenvectors.col(j).dot(v) * info.eigenvectors.col(j);
      }
    };

    Vector v = seeded_unit_vector(d, opts.seed + static_cast<std::uint64_t>(i));
    orthogonalize(v);
    if (v.norm() < 1e-14) {
      v = seeded_unit_vector(d, opts.seed ^ 0x517cc1b727220a95ULL);
      orthogonalize(v);
    }
    v.normalize();

    double rho = 0.0;
    double resid = 0.0;
    bool converged = false;
    bool rerandomized = false;
    for (int it = 0; it < opts.max_iters; ++it) {
      const Vector w = apply(v);
      const double wn = w.norm();
      if (wn < 1e-300) {
        // Operator annihilates the iterate; the remaining spectrum is null.
        rho = 0.0;
        resid = 0.0;
        converged = true;
        break;
      }
      rho = v.dot(w);
      resid = (w - rho * v).norm();
      if (resid <= 5.0 * opts.tol * (1.0 + std::abs(rho))) {
        converged = true;
        break;
      }
      v = w / wn;
      // Restart once from a fresh seed if half the budget brought no
      // convergence, covering starts nearly orthogonal to the top pair.
      if (!rerandomized && it == opts.max_iters / 2) {
        v = seeded_unit_vector(d, opts.seed + 0x2545f4914f6cdd1dULL +
                                      static_cast<std::uint64_t>(i));
        orthogonalize(v);
        v.normalize();
        rerandomized = true;
      }
    }

    orthogonalize(v);
    if (v.norm() > 1e-14) v.normalize();
    fix_sign(v);

    info.eigenvalues[i] = v.dot(model.hvp(x, v));
    info.eigenvectors.col(i) = v;
    if (!converged) {
      info.converged = false;
      info.last_residual = std::max(info.last_residual, resid);
    }
  }

  info.degenerate = info.eigenvalues[0] <= opts.tol;
  info.rank_estimate = estimate_rank(info);
  return info;
}

Index estimate_rank(const SpectralInfo& info, double threshold_ratio) {
  const double l1 = info.eigenvalues.size() ? info.eigenvalues[0] : 0.0;
  if (l1 <= 0.0) return 0;
  Index m = 0;
  for (Index i = 0; i < info.eigenvalues.size(); ++i) {
    if (info.eigenvalues[i] >= threshold_ratio * l1) ++m;
  }
  return m;
}

EigGradResult grad_top_eigenvalue(const LossModel& model, const Vector& x,
                                  const Vector& v1, const SpectralInfo* at,
                                  double tol) {
  EigGradResult res;
  if (at && at->eigenvalues.size() >= 2 &&
      at->eigengap() < 10.0 * tol * (1.0 + std::abs(at->lambda1()))) {
    res.degenerate_warning = true;
  }

  if (model.has_third_directional()) {
    res.grad = model.third_directional(x, v1);
    return res;
  }

  // Central differences of g(y) = v1 . H(y) v1 with v1 frozen. The step
  // balances truncation against cancellation for a twice-differenced value.
  const Index d = model.dim();
  const double h = 1e-4 * (1.0 + x.norm());
  res.grad.resize(d);
  for (Index j = 0; j < d; ++j) {
    Vector xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    const double gp = v1.dot(model.hvp(xp, v1));
    const double gm = v1.dot(model.hvp(xm, v1));
    res.grad[j] = (gp - gm) / (2.0 * h);
  }
  return res;
}

}  // namespace eos
