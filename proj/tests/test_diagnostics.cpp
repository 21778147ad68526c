#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "eoslab/loss.hpp"
#include "eoslab/optimizer.hpp"
#include "eoslab/stableness.hpp"

using namespace eos;

namespace {

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("stableness of a quadratic is step size times sharpness") {
  auto model = quadratic_loss(QuadraticSpec::diagonal(vec2(1.0, 0.4)));
  for (double eta : {0.3, 1.5, 2.5}) {
    for (const Vector& x : {vec2(1.0, 1.0), vec2(-0.2, 0.7)}) {
      const StablenessResult res = stableness(*model, x, eta);
      CHECK(res.value == doctest::Approx(eta * 1.0).epsilon(1e-9));
      CHECK(res.lower_bound == doctest::Approx(eta * 1.0).epsilon(1e-9));
    }
  }
  // The classical threshold sits at 2.
  CHECK(stableness(*model, vec2(1.0, 1.0), 1.5).value < 2.0);
  CHECK(stableness(*model, vec2(1.0, 1.0), 2.5).value > 2.0);
}

TEST_CASE("stableness needs a direction to walk along") {
  auto model = quadratic_loss(QuadraticSpec::diagonal(vec2(1.0, 0.4)));
  CHECK_THROWS_AS(stableness(*model, vec2(0.0, 0.0), 0.5),
                  std::invalid_argument);
}

TEST_CASE("segment supremum dominates the base-point bound") {
  auto model = toy_product_loss();
  const Vector x = vec2(1.0, 0.1);
  const StablenessResult res = stableness(*model, x, 0.3, 16);
  CHECK(res.value >= res.lower_bound - 1e-8);
  CHECK(res.grid_points == 17);

  // Grid oracle computed directly from the closed-form Hessian.
  const Vector g = model->gradient(x);
  double best = 0.0;
  for (int i = 0; i <= 16; ++i) {
    const double s = 0.3 * i / 16.0;
    const Vector y = x - s * g;
    const double a = 2.0 * y[1] * y[1];
    const double d = 2.0 * (1.0 + y[0] * y[0]);
    const double b = 4.0 * y[0] * y[1];
    const double lam =
        0.5 * (a + d + std::sqrt((a - d) * (a - d) + 4.0 * b * b));
    best = std::max(best, lam);
  }
  CHECK(res.value == doctest::Approx(0.3 * best).epsilon(1e-8));
}

TEST_CASE("grid refinement approaches the supremum from below") {
  auto model = toy_product_loss();
  const Vector x = vec2(1.0, 0.1);
  const double coarse = stableness(*model, x, 0.3, 16).value;
  const double fine = stableness(*model, x, 0.3, 32).value;
  CHECK(fine >= coarse - 1e-12);
}

TEST_CASE("square-root landscape stableness flags manifold crossings") {
  auto model = toy_product_loss();

  SUBCASE("a crossing segment diverges") {
    // From y > 0 with a step large enough to overshoot the flat line.
    const Vector x = vec2(1.0, 0.01);
    const SqrtStablenessResult res = sqrt_stableness(*model, x, 0.02);
    CHECK(res.diverged);
    CHECK(res.value == kStablenessCap);
  }

  SUBCASE("a short segment that stays on one side is bounded") {
    const Vector x = vec2(1.0, 0.5);
    const SqrtStablenessResult res = sqrt_stableness(*model, x, 0.01);
    CHECK(!res.diverged);
    CHECK(res.value < kStablenessCap);
  }
}

TEST_CASE("two-step oscillation identities in the stable window") {
  auto model = toy_product_loss();
  const double eta = 0.02;

  RunConfig cfg;
  cfg.eta = eta;
  cfg.steps = 800;
  cfg.noise.enabled = true;
  cfg.noise.seed = 5;

  SUBCASE("normalized descent balances inverse stableness") {
    cfg.kind = StepKind::NormalizedGD;
    const Trace tr = run(*model, cfg, vec2(1.0, 0.3));
    EosReportOptions opts;
    opts.first_step = 400;
    const auto recs = eos_two_step_report(*model, tr, opts);
    REQUIRE(recs.size() >= 300);
    double inv = 0.0, ratio = 0.0;
    for (const auto& r : recs) {
      inv += r.inv_stableness_sum;
      ratio += r.ratio;
    }
    inv /= static_cast<double>(recs.size());
    ratio /= static_cast<double>(recs.size());
    CHECK(inv == doctest::Approx(1.0).epsilon(0.05));
    CHECK(ratio == doctest::Approx(1.0).epsilon(0.05));
  }

  SUBCASE("square-root descent crosses the manifold almost every pair") {
    cfg.kind = StepKind::SqrtLossGD;
    const Trace tr = run(*model, cfg, vec2(1.0, 0.3));
    EosReportOptions opts;
    opts.first_step = 400;
    const auto recs = eos_two_step_report(*model, tr, opts);
    REQUIRE(recs.size() >= 300);
    long diverged = 0;
    for (const auto& r : recs) diverged += r.sqrt_stableness_diverged ? 1 : 0;
    CHECK(static_cast<double>(diverged) >= 0.9 * recs.size());
  }
}

TEST_CASE("pairs broken by a terminal marker are skipped") {
  auto model = quadratic_loss(QuadraticSpec::diagonal(vec2(1.0, 0.4)));
  Trace tr;
  tr.kind = StepKind::NormalizedGD;
  tr.eta = 0.1;
  TraceRecord a;
  a.step = 0;
  a.loss = 0.5;
  a.sqrt_loss = std::sqrt(0.5);
  a.grad_norm = 1.0;
  TraceRecord b = a;
  b.step = 2;  // gap: not consecutive
  tr.records = {a, b};
  tr.iterates = {vec2(1.0, 0.0), vec2(0.8, 0.0)};
  const auto recs = eos_two_step_report(*model, tr);
  CHECK(recs.empty());
}
