#include "eoslab/loss.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <random>
#include <utility>

namespace eos {

std::vector<Vector> LossModel::per_example_gradients(const Vector&) const {
  throw std::logic_error("LossModel: per-example gradients not available");
}

Vector LossModel::third_directional(const Vector&, const Vector&) const {
  throw std::logic_error("LossModel: analytic third-order oracle not available");
}

double sqrt_loss(const LossModel& model, const Vector& x) {
  const double v = model.value(x);
  return v <= kLossFloor ? 0.0 : std::sqrt(v);
}

// ---------------------------------------------------------------------------
// Quadratic loss 0.5 x^T A x
// ---------------------------------------------------------------------------

namespace {

void validate_spectrum(const Vector& lam) {
  if (lam.size() < 1) throw std::invalid_argument("quadratic spec: empty spectrum");
  for (Index i = 0; i < lam.size(); ++i) {
    if (!(lam[i] > 0.0)) {
      throw std::invalid_argument("quadratic spec: eigenvalues must be positive");
    }
  }
  if (lam.size() >= 2) {
    double l1 = lam.maxCoeff();
    double l2 = -1.0;
    for (Index i = 0; i < lam.size(); ++i) {
      if (lam[i] < l1 && lam[i] > l2) l2 = lam[i];
    }
    // Repeated top eigenvalue has no second-largest strictly below it.
    Index top_count = 0;
    for (Index i = 0; i < lam.size(); ++i) {
      if (lam[i] == l1) ++top_count;
    }
    if (top_count > 1) {
      throw std::invalid_argument("quadratic spec: top eigenvalue must be simple");
    }
  }
}

class QuadraticLoss final : public LossModel {
 public:
  explicit QuadraticLoss(Matrix a) : a_(std::move(a)) {}

  Index dim() const override { return a_.rows(); }

  double value(const Vector& x) const override {
    check_dim(x);
    return 0.5 * x.dot(a_ * x);
  }

  Vector gradient(const Vector& x) const override {
    check_dim(x);
    return a_ * x;
  }

  Vector hvp(const Vector& x, const Vector& v) const override {
    check_dim(x);
    check_dim(v);
    return a_ * v;
  }

  bool has_third_directional() const override { return true; }

  Vector third_directional(const Vector& x, const Vector&) const override {
    check_dim(x);
    return Vector::Zero(dim());
  }

 private:
  Matrix a_;
};

}  // namespace

QuadraticSpec QuadraticSpec::diagonal(Vector eigenvalues) {
  QuadraticSpec s;
  s.eigenvalues = std::move(eigenvalues);
  return s;
}

QuadraticSpec QuadraticSpec::dense(Matrix a) {
  QuadraticSpec s;
  s.matrix = std::move(a);
  return s;
}

std::unique_ptr<LossModel> quadratic_loss(const QuadraticSpec& spec) {
  if (spec.matrix.size() == 0) {
    validate_spectrum(spec.eigenvalues);
    return std::make_unique<QuadraticLoss>(
        Matrix(spec.eigenvalues.asDiagonal()));
  }
  const Matrix& a = spec.matrix;
  if (a.rows() != a.cols()) {
    throw std::invalid_argument("quadratic spec: matrix must be square");
  }
  const double scale = a.cwiseAbs().maxCoeff();
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + scale)) {
    throw std::invalid_argument("quadratic spec: matrix must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  validate_spectrum(es.eigenvalues());
  return std::make_unique<QuadraticLoss>(a);
}

// ---------------------------------------------------------------------------
// Product loss (1 + x^2) y^2
// ---------------------------------------------------------------------------

namespace {

class ToyProductLoss final : public LossModel {
 public:
  Index dim() const override { return 2; }

  double value(const Vector& p) const override {
    check_dim(p);
    const double x = p[0], y = p[1];
    return (1.0 + x * x) * (y * y);
  }

  Vector gradient(const Vector& p) const override {
    check_dim(p);
    const double x = p[0], y = p[1];
    Vector g(2);
    g << 2.0 * x * y * y, 2.0 * (1.0 + x * x) * y;
    return g;
  }

  Vector hvp(const Vector& p, const Vector& v) const override {
    check_dim(p);
    check_dim(v);
    const double x = p[0], y = p[1];
    Vector out(2);
    out[0] = 2.0 * y * y * v[0] + 4.0 * x * y * v[1];
    out[1] = 4.0 * x * y * v[0] + 2.0 * (1.0 + x * x) * v[1];
    return out;
  }

  bool has_per_example_gradients() const override { return true; }

  std::vector<Vector> per_example_gradients(const Vector& p) const override {
    return {gradient(p)};
  }

  bool has_third_directional() const override { return true; }

  Vector third_directional(const Vector& p, const Vector& v) const override {
    check_dim(p);
    check_dim(v);
    const double x = p[0], y = p[1];
    // Nonzero third partials: L_xxy = 4y, L_xyy = 4x.
    Vector out(2);
    out[0] = 8.0 * y * v[0] * v[1] + 4.0 * x * v[1] * v[1];
    out[1] = 4.0 * y * v[0] * v[0] + 8.0 * x * v[0] * v[1];
    return out;
  }
};

}  // namespace

std::unique_ptr<LossModel> toy_product_loss() {
  return std::make_unique<ToyProductLoss>();
}

// ---------------------------------------------------------------------------
// MLP regression loss
// ---------------------------------------------------------------------------

namespace {

struct ActivationFns {
  double (*f)(double);
  double (*df)(double);
  double (*d2f)(double);
};

double tanh_f(double z) { return std::tanh(z); }
double tanh_df(double z) {
  const double t = std::tanh(z);
  return 1.0 - t * t;
}
double tanh_d2f(double z) {
  const double t = std::tanh(z);
  return -2.0 * t * (1.0 - t * t);
}

// Exact GELU, z * Phi(z) with the standard normal cdf.
double norm_cdf(double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); }
double norm_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
}
double gelu_f(double z) { return z * norm_cdf(z); }
double gelu_df(double z) { return norm_cdf(z) + z * norm_pdf(z); }
double gelu_d2f(double z) { return (2.0 - z * z) * norm_pdf(z); }

ActivationFns activation_fns(Activation a) {
  switch (a) {
    case Activation::Tanh:
      return {tanh_f, tanh_df, tanh_d2f};
    case Activation::Gelu:
      return {gelu_f, gelu_df, gelu_d2f};
  }
  throw std::invalid_argument("unknown activation");
}

class MlpRegressionLoss final : public LossModel {
 public:
  explicit MlpRegressionLoss(MlpSpec spec)
      : widths_(spec.widths),
        act_(activation_fns(spec.activation)),
        inputs_(std::move(spec.data.inputs)),
        targets_(std::move(spec.data.targets)) {
    if (widths_.size() < 2) {
      throw std::invalid_argument("mlp: need at least input and output widths");
    }
    if (inputs_.rows() != targets_.rows()) {
      throw std::invalid_argument("mlp: inputs and targets disagree on sample count");
    }
    if (inputs_.cols() != widths_.front() || targets_.cols() != widths_.back()) {
      throw std::invalid_argument("mlp: dataset shape does not match layer widths");
    }
    if (inputs_.rows() * targets_.cols() < 1) {
      throw std::invalid_argument("mlp: dataset is empty");
    }
    dim_ = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      dim_ += widths_[l + 1] * (widths_[l] + 1);
    }
  }

  Index dim() const override { return dim_; }

  double value(const Vector& x) const override {
    check_dim(x);
    const Layers p = unpack(x);
    double acc = 0.0;
    for (Index i = 0; i < inputs_.rows(); ++i) {
      Vector out = forward(p, inputs_.row(i).transpose());
      acc += (out - targets_.row(i).transpose()).squaredNorm();
    }
    return acc / static_cast<double>(n_terms());
  }

  Vector gradient(const Vector& x) const override {
    check_dim(x);
    const Layers p = unpack(x);
    Layers g = zero_like(p);
    for (Index i = 0; i < inputs_.rows(); ++i) {
      accumulate_example_gradient(p, i, 2.0 / static_cast<double>(n_terms()), g);
    }
    return pack(g);
  }

  Vector hvp(const Vector& x, const Vector& v) const override {
    check_dim(x);
    check_dim(v);
    const Layers p = unpack(x);
    const Layers dp = unpack(v);
    Layers hv = zero_like(p);
    for (Index i = 0; i < inputs_.rows(); ++i) {
      accumulate_example_hvp(p, dp, i, 2.0 / static_cast<double>(n_terms()), hv);
    }
    return pack(hv);
  }

  bool has_per_example_gradients() const override { return true; }

  std::vector<Vector> per_example_gradients(const Vector& x) const override {
    check_dim(x);
    const Layers p = unpack(x);
    std::vector<Vector> grads;
    grads.reserve(static_cast<std::size_t>(n_terms()));
    const Index c_out = targets_.cols();
    for (Index i = 0; i < inputs_.rows(); ++i) {
      for (Index c = 0; c < c_out; ++c) {
        Layers g = zero_like(p);
        accumulate_residual_gradient(p, i, c, 2.0, g);
        grads.push_back(pack(g));
      }
    }
    return grads;
  }

 private:
  struct Layers {
    std::vector<Matrix> w;
    std::vector<Vector> b;
  };

  Index n_terms() const { return inputs_.rows() * targets_.cols(); }

  Layers unpack(const Vector& x) const {
    Layers p;
    Index off = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      const Index rows = widths_[l + 1], cols = widths_[l];
      p.w.emplace_back(
          Eigen::Map<const Matrix>(x.data() + off, rows, cols));
      off += rows * cols;
      p.b.emplace_back(Eigen::Map<const Vector>(x.data() + off, rows));
      off += rows;
    }
    return p;
  }

  Vector pack(const Layers& p) const {
    Vector x(dim_);
    Index off = 0;
    for (std::size_t l = 0; l < p.w.size(); ++l) {
      Eigen::Map<Matrix>(x.data() + off, p.w[l].rows(), p.w[l].cols()) = p.w[l];
      off += p.w[l].size();
      Eigen::Map<Vector>(x.data() + off, p.b[l].size()) = p.b[l];
      off += p.b[l].size();
    }
    return x;
  }

  Layers zero_like(const Layers& p) const {
    Layers z;
    for (std::size_t l = 0; l < p.w.size(); ++l) {
      z.w.push_back(Matrix::Zero(p.w[l].rows(), p.w[l].cols()));
      z.b.push_back(Vector::Zero(p.b[l].size()));
    }
    return z;
  }

  // Hidden layers use the activation, the output layer is linear.
  Vector forward(const Layers& p, const Vector& in) const {
    Vector a = in;
    for (std::size_t l = 0; l < p.w.size(); ++l) {
      Vector z = p.w[l] * a + p.b[l];
      if (l + 1 < p.w.size()) {
        a = z.unaryExpr([&](double t) { return act_.f(t); });
      } else {
        a = std::move(z);
      }
    }
    return a;
  }

  struct Tape {
    std::vector<Vector> a;  // activations, a[0] = input
    std::vector<Vector> z;  // pre-activations per layer
  };

  Tape forward_tape(const Layers& p, const Vector& in) const {
    Tape t;
    t.a.push_back(in);
    for (std::size_t l = 0; l < p.w.size(); ++l) {
      Vector z = p.w[l] * t.a.back() + p.b[l];
      t.z.push_back(z);
      if (l + 1 < p.w.size()) {
        t.a.push_back(z.unaryExpr([&](double v) { return act_.f(v); }));
      } else {
        t.a.push_back(z);
      }
    }
    return t;
  }

  // Backward pass from an output-space cotangent, accumulating into g.
  void backward(const Layers& p, const Tape& t, Vector delta, Layers& g) const {
    for (std::size_t l = p.w.size(); l-- > 0;) {
      g.w[l] += delta * t.a[l].transpose();
      g.b[l] += delta;
      if (l > 0) {
        Vector back = p.w[l].transpose() * delta;
        delta = back.cwiseProduct(
            t.z[l - 1].unaryExpr([&](double v) { return act_.df(v); }));
      }
    }
  }

  void accumulate_example_gradient(const Layers& p, Index i, double coeff,
                                   Layers& g) const {
    const Tape t = forward_tape(p, inputs_.row(i).transpose());
    Vector delta = coeff * (t.a.back() - targets_.row(i).transpose());
    backward(p, t, std::move(delta), g);
  }

  void accumulate_residual_gradient(const Layers& p, Index i, Index c,
                                    double coeff, Layers& g) const {
    const Tape t = forward_tape(p, inputs_.row(i).transpose());
    Vector delta = Vector::Zero(widths_.back());
    delta[c] = coeff * (t.a.back()[c] - targets_(i, c));
    backward(p, t, std::move(delta), g);
  }

  // Forward-over-reverse directional derivative of the gradient.
  void accumulate_example_hvp(const Layers& p, const Layers& dp, Index i,
                              double coeff, Layers& hv) const {
    const std::size_t n_layers = p.w.size();
    const Tape t = forward_tape(p, inputs_.row(i).transpose());

    // Tangent forward pass.
    std::vector<Vector> da(n_layers + 1), dz(n_layers);
    da[0] = Vector::Zero(t.a[0].size());
    for (std::size_t l = 0; l < n_layers; ++l) {
      dz[l] = dp.w[l] * t.a[l] + p.w[l] * da[l] + dp.b[l];
      if (l + 1 < n_layers) {
        da[l + 1] = dz[l].cwiseProduct(
            t.z[l].unaryExpr([&](double v) { return act_.df(v); }));
      } else {
        da[l + 1] = dz[l];
      }
    }

    // Reverse pass carrying (delta, ddelta) jointly.
    Vector delta = coeff * (t.a.back() - targets_.row(i).transpose());
    Vector ddelta = coeff * da[n_layers];
    for (std::size_t l = n_layers; l-- > 0;) {
      hv.w[l] += ddelta * t.a[l].transpose() + delta * da[l].transpose();
      hv.b[l] += ddelta;
      if (l > 0) {
        Vector back = p.w[l].transpose() * delta;
        Vector dback = dp.w[l].transpose() * delta + p.w[l].transpose() * ddelta;
        Vector sp = t.z[l - 1].unaryExpr([&](double v) { return act_.df(v); });
        Vector spp = t.z[l - 1].unaryExpr([&](double v) { return act_.d2f(v); });
        ddelta = dback.cwiseProduct(sp) +
                 back.cwiseProduct(spp).cwiseProduct(dz[l - 1]);
        delta = back.cwiseProduct(sp);
      }
    }
  }

  std::vector<Index> widths_;
  ActivationFns act_;
  Matrix inputs_;
  Matrix targets_;
  Index dim_ = 0;
};

}  // namespace

namespace {

Vector packed_forward(const std::vector<Index>& w, const ActivationFns& fns,
                      const Vector& params, const Vector& in) {
  Vector a = in;
  Index off = 0;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    const Index rows = w[l + 1], cols = w[l];
    Eigen::Map<const Matrix> wm(params.data() + off, rows, cols);
    off += rows * cols;
    Eigen::Map<const Vector> bm(params.data() + off, rows);
    off += rows;
    Vector z = wm * a + bm;
    a = (l + 2 < w.size())
            ? Vector(z.unaryExpr([&](double t) { return fns.f(t); }))
            : z;
  }
  return a;
}

}  // namespace

RegressionDataset make_synthetic_regression_dataset(
    const std::vector<Index>& widths, Index n_samples, std::uint64_t seed) {
  if (widths.size() < 2 || n_samples < 1) {
    throw std::invalid_argument("dataset: bad widths or sample count");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  RegressionDataset d;
  d.inputs.resize(n_samples, widths.front());
  for (Index i = 0; i < d.inputs.size(); ++i) {
    d.inputs.data()[i] = unit(rng);
  }

  // Labels come from a seeded teacher of the same architecture, so the zero
  // loss set is reachable for the student.
  const Vector teacher =
      mlp_initial_point(widths, seed ^ 0x9e3779b97f4a7c15ULL, 0.8);
  const ActivationFns fns = activation_fns(Activation::Tanh);
  d.targets.resize(n_samples, widths.back());
  for (Index i = 0; i < n_samples; ++i) {
    d.targets.row(i) =
        packed_forward(widths, fns, teacher, d.inputs.row(i).transpose())
            .transpose();
  }
  return d;
}

std::unique_ptr<LossModel> mlp_regression_loss(MlpSpec spec) {
  return std::make_unique<MlpRegressionLoss>(std::move(spec));
}

Vector mlp_initial_point(const std::vector<Index>& widths, std::uint64_t seed,
                         double scale) {
  Index dim = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    dim += widths[l + 1] * (widths[l] + 1);
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  Vector x(dim);
  Index off = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const double w_scale = scale / std::sqrt(static_cast<double>(widths[l]));
    for (Index k = 0; k < widths[l + 1] * widths[l]; ++k) {
      x[off++] = w_scale * unit(rng);
    }
    for (Index k = 0; k < widths[l + 1]; ++k) {
      x[off++] = 0.1 * scale * unit(rng);
    }
  }
  return x;
}

// ---------------------------------------------------------------------------
// Finite-difference oracle
// ---------------------------------------------------------------------------

FiniteDiffReport finite_diff_check(const LossModel& model, const Vector& x,
                                   int n_probes, std::uint64_t seed) {
  FiniteDiffReport rep;
  const Index d = model.dim();
  const double eps3 = std::cbrt(std::numeric_limits<double>::epsilon());

  const Vector g = model.gradient(x);
  if (!g.allFinite()) rep.nan_detected = true;

  Vector g_fd(d);
  for (Index j = 0; j < d; ++j) {
    const double h = eps3 * (1.0 + std::abs(x[j]));
    Vector xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    g_fd[j] = (model.value(xp) - model.value(xm)) / (2.0 * h);
  }
  if (!g_fd.allFinite()) rep.nan_detected = true;
  rep.grad_rel_err = (g - g_fd).norm() / (1.0 + g.norm());

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (int p = 0; p < n_probes; ++p) {
    Vector v(d);
    for (Index j = 0; j < d; ++j) v[j] = unit(rng);
    v.normalize();
    const double h = eps3 * (1.0 + x.norm());
    const Vector hv = model.hvp(x, v);
    const Vector hv_fd =
        (model.gradient(x + h * v) - model.gradient(x - h * v)) / (2.0 * h);
    if (!hv.allFinite() || !hv_fd.allFinite()) rep.nan_detected = true;
    const double err = (hv - hv_fd).norm() / (1.0 + hv.norm());
    rep.hvp_rel_err = std::max(rep.hvp_rel_err, err);
  }
  return rep;
}

}  // namespace eos
