#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

#include "eoslab/types.hpp"

namespace eos {

/// Loss values below this floor are treated as exactly zero wherever a
/// square root of the loss is taken.
inline constexpr double kLossFloor = 1e-300;

/// A smooth scalar loss with analytic first- and second-order oracles.
///
/// All oracles are pure functions of their arguments; a model is immutable
/// after construction and safe to evaluate concurrently. The input dimension
/// is fixed at construction and checked on every call.
class LossModel {
 public:
  virtual ~LossModel() = default;

  virtual Index dim() const = 0;

  virtual double value(const Vector& x) const = 0;
  virtual Vector gradient(const Vector& x) const = 0;

  /// Hessian-vector product H(x) v. Linear in v and symmetric as a bilinear
  /// form: u . hvp(x, v) == v . hvp(x, u).
  virtual Vector hvp(const Vector& x, const Vector& v) const = 0;

  /// Decomposition of the loss into a mean of scalar terms, when available.
  /// The returned gradients average exactly to gradient(x).
  virtual bool has_per_example_gradients() const { return false; }
  virtual std::vector<Vector> per_example_gradients(const Vector& x) const;

  /// Analytic contraction of the third derivative, d3L(x)[v, v, .],
  /// when available.
  virtual bool has_third_directional() const { return false; }
  virtual Vector third_directional(const Vector& x, const Vector& v) const;

 protected:
  void check_dim(const Vector& x) const {
    if (x.size() != dim()) {
      throw std::invalid_argument("LossModel: input has dimension " +
                                  std::to_string(x.size()) + ", expected " +
                                  std::to_string(dim()));
    }
  }
};

/// sqrt(value) with the floor applied, so exact minimizers report 0.
double sqrt_loss(const LossModel& model, const Vector& x);

/// Positive-definite quadratic spec, either a full symmetric matrix or a
/// list of eigenvalues for the diagonal form. Requires all eigenvalues
/// positive and a strict gap between the top two.
struct QuadraticSpec {
  Matrix matrix;  // empty when diagonal
  Vector eigenvalues;

  static QuadraticSpec diagonal(Vector eigenvalues);
  static QuadraticSpec dense(Matrix a);
};

std::unique_ptr<LossModel> quadratic_loss(const QuadraticSpec& spec);

/// Two-dimensional loss (1 + x^2) y^2. Zero exactly on the line y = 0,
/// positive elsewhere, with analytic third-order oracle.
std::unique_ptr<LossModel> toy_product_loss();

enum class Activation : std::uint8_t { Tanh, Gelu };

struct RegressionDataset {
  Matrix inputs;   // n x d_in
  Matrix targets;  // n x d_out
};

/// Deterministic synthetic regression data: seeded inputs and targets drawn
/// from a seeded teacher network of the same architecture.
RegressionDataset make_synthetic_regression_dataset(
    const std::vector<Index>& widths, Index n_samples, std::uint64_t seed);

struct MlpSpec {
  std::vector<Index> widths;  // input, hidden..., output
  Activation activation = Activation::Tanh;
  RegressionDataset data;
};

/// Fully-connected regression network with a smooth activation and mean
/// squared error over all scalar residuals. Gradients and Hessian-vector
/// products are analytic backward passes; per-example gradients expose one
/// term per scalar residual.
std::unique_ptr<LossModel> mlp_regression_loss(MlpSpec spec);

/// Seeded Gaussian init for the packed MLP parameter vector.
Vector mlp_initial_point(const std::vector<Index>& widths, std::uint64_t seed,
                         double scale = 0.5);

struct FiniteDiffReport {
  double grad_rel_err = 0.0;  // gradient vs value differences
  double hvp_rel_err = 0.0;   // hvp vs gradient differences
  bool nan_detected = false;

  bool ok(double grad_tol, double hvp_tol) const {
    return !nan_detected && grad_rel_err <= grad_tol && hvp_rel_err <= hvp_tol;
  }
};

/// Central-difference consistency check of the analytic oracles at x. The
/// step is cbrt(machine epsilon) scaled by coordinate magnitude. Probe
/// directions for the hvp check are seeded.
FiniteDiffReport finite_diff_check(const LossModel& model, const Vector& x,
                                   int n_probes = 3, std::uint64_t seed = 17);

}  // namespace eos
