#include "eoslab/manifold.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

namespace eos {

namespace {

Vector rk4_step(const LossModel& model, const Vector& y, double h) {
  const Vector k1 = -model.gradient(y);
  const Vector k2 = -model.gradient(y + 0.5 * h * k1);
  const Vector k3 = -model.gradient(y + 0.5 * h * k2);
  const Vector k4 = -model.gradient(y + h * k3);
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

PhiResult estimate_phi(const LossModel& model, const Vector& x,
                       const PhiOptions& opts) {
  PhiResult res;

  const SpectralInfo at_x = top_eigenpairs(model, x, 1, opts.eig);
  const double lam_scale = std::max(std::abs(at_x.lambda1()), 1e-12);
  const double tol =
      opts.tol > 0.0 ? opts.tol : 1e-10 * (1.0 + std::abs(at_x.lambda1()));
  double h = opts.initial_step > 0.0 ? opts.initial_step : 0.1 / lam_scale;
  const double h_max = opts.max_step_factor / lam_scale;

  Vector y = x;
  double t = 0.0;
  double loss = model.value(y);
  int accepted_streak = 0;

  res.status = PhiStatus::MaxTimeExceeded;
  for (long step = 0; step < opts.max_steps && t < opts.max_flow_time; ++step) {
    if (model.gradient(y).norm() <= tol) {
      res.status = PhiStatus::Converged;
      break;
    }
    const Vector y_try = rk4_step(model, y, h);
    const double loss_try = y_try.allFinite()
                                ? model.value(y_try)
                                : std::numeric_limits<double>::quiet_NaN();
    if (!std::isfinite(loss_try) || loss_try > loss * (1.0 + 1e-12) + 1e-300) {
      h *= 0.5;
      accepted_streak = 0;
      if (h < 1e-14 * h_max) {
        // A non-finite trial is a genuine blow-up; a rounding-level stall
        // near the floor is only a failure to reach tolerance.
        res.status = std::isfinite(loss_try) ? PhiStatus::MaxTimeExceeded
                                             : PhiStatus::Diverged;
        break;
      }
      continue;
    }
    y = y_try;
    loss = loss_try;
    t += h;
    if (++accepted_streak >= 4 && h < h_max) {
      h = std::min(2.0 * h, h_max);
      accepted_streak = 0;
    }
  }
  if (res.status != PhiStatus::Diverged &&
      model.gradient(y).norm() <= tol) {
    res.status = PhiStatus::Converged;
  }

  res.phi = y;
  res.residual_grad_norm = model.gradient(y).norm();
  res.flow_time_used = t;
  res.value_at_phi = loss;
  res.spectral = top_eigenpairs(model, y, opts.top_k, opts.eig);
  return res;
}

Vector NormalProjector::normal(const Vector& v) const {
  if (basis_.cols() == 0) return Vector::Zero(v.size());
  return basis_ * (basis_.transpose() * v);
}

Vector NormalProjector::tangential(const Vector& v) const {
  return v - normal(v);
}

NormalProjector normal_projection(const LossModel& model,
                                  const Vector& p_on_manifold,
                                  ProjectionMethod method, Index top_m,
                                  double pinv_reg) {
  NormalProjector proj;
  if (method == ProjectionMethod::HessianEigvecs) {
    const Index k = top_m > 0 ? top_m : std::min<Index>(model.dim(), 8);
    SpectralInfo info = top_eigenpairs(model, p_on_manifold, k);
    const Index m = top_m > 0 ? top_m : estimate_rank(info);
    proj.basis_ = info.eigenvectors.leftCols(m);
    return proj;
  }

  if (!model.has_per_example_gradients()) {
    throw std::invalid_argument(
        "normal_projection: model has no per-example gradient decomposition");
  }
  const std::vector<Vector> grads =
      model.per_example_gradients(p_on_manifold);
  Matrix g(model.dim(), static_cast<Index>(grads.size()));
  for (Index j = 0; j < g.cols(); ++j) g.col(j) = grads[j];

  // Orthonormal basis of span{g_j} through the regularized Gram matrix;
  // directions below the regularization scale are dropped.
  Matrix gram = g.transpose() * g;
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
  const double top = es.eigenvalues().size()
                         ? es.eigenvalues().tail(1)(0)
                         : 0.0;
  const double cut = pinv_reg * std::max(top, 0.0) + 1e-300;
  std::vector<Index> keep;
  for (Index j = 0; j < es.eigenvalues().size(); ++j) {
    if (es.eigenvalues()[j] > cut) keep.push_back(j);
  }
  proj.basis_.resize(model.dim(), static_cast<Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    Vector dir = g * es.eigenvectors().col(keep[c]);
    proj.basis_.col(static_cast<Index>(c)) =
        dir / std::sqrt(es.eigenvalues()[keep[c]]);
  }
  return proj;
}

ManifoldObservables observables(const LossModel& model, const Vector& x,
                                double eta, const PhiResult& phi,
                                const ObservablesOptions& opts) {
  ManifoldObservables obs;
  const SpectralInfo& sp = phi.spectral;
  const Index m = opts.rank_override > 0
                      ? std::min(opts.rank_override, sp.eigenvalues.size())
                      : estimate_rank(sp, opts.rank_threshold);
  if (m < 1) {
    throw std::runtime_error(
        "observables: Hessian at the manifold point is numerically flat");
  }
  obs.rank = m;

  const Vector d = x - phi.phi;
  Vector tilde(m);
  for (Index i = 0; i < m; ++i) {
    const double ci = sp.eigenvectors.col(i).dot(d);
    const double li = std::max(sp.eigenvalues[i], 0.0);
    tilde[i] = opts.tilde_kind == TildeKind::Hessian
                   ? sp.eigenvalues[i] * ci
                   : std::sqrt(2.0 * li) * ci;
  }
  obs.tilde_norm = tilde.norm();
  obs.G = std::abs(tilde[0]);

  obs.R.resize(m);
  obs.Rbar.resize(m);
  for (Index j = 0; j < m; ++j) {
    double s2 = 0.0;   // sum of lambda_i^2 c_i^2
    double s1 = 0.0;   // sum of lambda_i c_i^2
    for (Index i = j; i < m; ++i) {
      const double ci = sp.eigenvectors.col(i).dot(d);
      s2 += sp.eigenvalues[i] * sp.eigenvalues[i] * ci * ci;
      s1 += std::max(sp.eigenvalues[i], 0.0) * ci * ci;
    }
    obs.R[j] = std::sqrt(s2) - sp.eigenvalues[j] * eta;
    obs.Rbar[j] = std::sqrt(s1) - eta * std::sqrt(0.5) * sp.eigenvalues[j];
  }

  if (obs.G < 1e-300) {
    obs.theta = M_PI / 2.0;  // undefined angle, maximal by convention
  } else {
    const double rest =
        m > 1 ? std::sqrt(std::max(tilde.squaredNorm() - tilde[0] * tilde[0],
                                   0.0))
              : 0.0;
    obs.theta = std::atan(rest / obs.G);
  }

  const Vector g = model.gradient(x);
  const double gn2 = g.squaredNorm();
  double lam_x = opts.lambda1_at_x;
  if (lam_x < 0.0) {
    lam_x = top_eigenpairs(model, x, 1, opts.eig).lambda1();
  }
  obs.lambda1_at_x = lam_x;
  obs.alignment =
      (gn2 > 0.0 && lam_x != 0.0) ? g.dot(model.hvp(x, g)) / (lam_x * gn2)
                                  : 0.0;
  return obs;
}

}  // namespace eos
