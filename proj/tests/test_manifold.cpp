#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "eoslab/loss.hpp"
#include "eoslab/manifold.hpp"

using namespace eos;

namespace {

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

// Along the descent flow of (1 + x^2) y^2 the quantity
// ln x + x^2/2 - y^2/2 is conserved, so the flow endpoint on y = 0 solves
// ln x + x^2/2 = c. Bisection on that equation is the oracle here.
double flow_endpoint_oracle(double x0, double y0) {
  const double c = std::log(x0) + 0.5 * x0 * x0 - 0.5 * y0 * y0;
  auto f = [&](double x) { return std::log(x) + 0.5 * x * x - c; };
  double lo = 1e-8, hi = 10.0;
  REQUIRE(f(lo) < 0.0);
  REQUIRE(f(hi) > 0.0);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("gradient flow endpoint on the quadratic is the origin") {
  auto model = quadratic_loss(QuadraticSpec::diagonal(vec2(1.0, 0.4)));
  const PhiResult res = estimate_phi(*model, vec2(1.5, -2.0));
  CHECK(res.converged());
  CHECK(res.phi.norm() <= 1e-9);
  CHECK(res.value_at_phi <= model->value(vec2(1.5, -2.0)));
}

TEST_CASE("flow endpoint matches the conserved-quantity oracle") {
  auto model = toy_product_loss();
  const double expected = flow_endpoint_oracle(1.0, 0.5);
  CHECK(expected == doctest::Approx(0.93754).epsilon(2e-5));

  const PhiResult res = estimate_phi(*model, vec2(1.0, 0.5));
  CHECK(res.converged());
  // The endpoint is truncation-limited at the default step policy.
  CHECK(res.phi[0] == doctest::Approx(expected).epsilon(2e-5));
  CHECK(std::abs(res.phi[1]) <= 1e-9);
  // Spectrum is attached at the endpoint actually reached.
  const double phi_x = res.phi[0];
  CHECK(res.spectral.lambda1() ==
        doctest::Approx(2.0 * (1.0 + phi_x * phi_x)).epsilon(1e-9));
}

TEST_CASE("points on the flat line stay put") {
  auto model = toy_product_loss();
  const PhiResult res = estimate_phi(*model, vec2(2.0, 0.0));
  CHECK(res.converged());
  CHECK(res.flow_time_used == 0.0);
  CHECK((res.phi - vec2(2.0, 0.0)).norm() == 0.0);
}

TEST_CASE("flow estimation is idempotent") {
  auto model = toy_product_loss();
  const PhiResult first = estimate_phi(*model, vec2(1.0, 0.4));
  REQUIRE(first.converged());
  const double tol = 1e-10 * (1.0 + first.spectral.lambda1());
  const PhiResult second = estimate_phi(*model, first.phi);
  CHECK((second.phi - first.phi).norm() <= 10.0 * tol);
}

TEST_CASE("flow endpoint is insensitive to sliding along the gradient") {
  // Moving the start point along its own gradient direction changes the
  // endpoint only at second order; halving the slide shrinks the change
  // quadratically.
  auto model = toy_product_loss();
  const Vector base = vec2(1.0, 0.5);
  const Vector dir = model->gradient(base).normalized();

  PhiOptions opts;
  opts.tol = 1e-13;
  const Vector phi0 = estimate_phi(*model, base, opts).phi;

  double prev_err = -1.0;
  for (double delta : {2e-2, 1e-2, 5e-3}) {
    const Vector moved = estimate_phi(*model, base + delta * dir, opts).phi;
    const double err = (moved - phi0).norm();
    if (prev_err > 0.0) {
      CHECK(err / prev_err <= 0.3);
    }
    prev_err = err;
  }
}

TEST_CASE("projectors split space cleanly") {
  auto model = toy_product_loss();
  const Vector p = vec2(1.0, 0.0);
  const NormalProjector proj =
      normal_projection(*model, p, ProjectionMethod::HessianEigvecs);

  CHECK(proj.normal_rank() == 1);
  // The normal direction at (1, 0) is the second axis.
  CHECK((proj.tangential(vec2(4.0, 0.0)) - vec2(4.0, 0.0)).norm() <= 1e-12);
  CHECK((proj.normal(vec2(0.0, 3.0)) - vec2(0.0, 3.0)).norm() <= 1e-10);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    const Vector v = vec2(unit(rng), unit(rng));
    const Vector pv = proj.normal(v);
    CHECK((proj.normal(pv) - pv).norm() <= 1e-10);           // idempotent
    CHECK((pv + proj.tangential(v) - v).norm() <= 1e-12);    // complementary
  }
}

TEST_CASE("full-rank quadratic has identity normal projector") {
  auto model = quadratic_loss(QuadraticSpec::diagonal(vec2(1.0, 0.4)));
  const NormalProjector proj = normal_projection(
      *model, vec2(0.0, 0.0), ProjectionMethod::HessianEigvecs, 2);
  const Vector v = vec2(0.3, -0.7);
  CHECK((proj.normal(v) - v).norm() <= 1e-10);
  CHECK(proj.tangential(v).norm() <= 1e-10);
}

TEST_CASE("per-example span agrees with the eigenvector projector") {
  auto model = toy_product_loss();
  const Vector p = vec2(1.0, 1e-6);  // just off the flat line
  const NormalProjector a =
      normal_projection(*model, p, ProjectionMethod::HessianEigvecs);
  const NormalProjector b =
      normal_projection(*model, p, ProjectionMethod::PerExampleSpan);
  REQUIRE(b.normal_rank() == 1);

  std::mt19937_64 rng(8);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 10; ++i) {
    const Vector v = vec2(unit(rng), unit(rng));
    CHECK((a.normal(v) - b.normal(v)).norm() <= 1e-6 * (1.0 + v.norm()));
  }
}

TEST_CASE("per-example span requires the decomposition") {
  auto model = quadratic_loss(QuadraticSpec::diagonal(vec2(1.0, 0.4)));
  CHECK_THROWS_AS(normal_projection(*model, vec2(0.1, 0.1),
                                     ProjectionMethod::PerExampleSpan),
                  std::invalid_argument);
}

TEST_CASE("observables on the quadratic match direct arithmetic") {
  auto model = quadratic_loss(QuadraticSpec::diagonal(vec2(1.0, 0.4)));
  const Vector x = vec2(0.05, 0.02);
  PhiOptions popts;
  popts.top_k = 2;
  const PhiResult phi = estimate_phi(*model, x, popts);
  REQUIRE(phi.converged());
  REQUIRE(phi.phi.norm() <= 1e-9);

  const ManifoldObservables obs = observables(*model, x, 0.1, phi);
  REQUIRE(obs.rank == 2);
  // R_1 = sqrt(0.05^2 + 0.008^2) - 0.1, R_2 = 0.008 - 0.04.
  CHECK(obs.R[0] == doctest::Approx(-0.0493640).epsilon(1e-5));
  CHECK(obs.R[1] == doctest::Approx(-0.032).epsilon(1e-7));
}

TEST_CASE("observables at zero displacement degrade gracefully") {
  auto model = toy_product_loss();
  const Vector x = vec2(1.0, 0.0);
  PhiOptions popts;
  popts.top_k = 2;
  const PhiResult phi = estimate_phi(*model, x, popts);
  const double eta = 0.1;
  const ManifoldObservables obs = observables(*model, x, eta, phi);
  REQUIRE(obs.rank == 1);
  CHECK(obs.G == 0.0);
  CHECK(obs.theta == doctest::Approx(M_PI / 2.0));
  CHECK(obs.R[0] == doctest::Approx(-phi.spectral.lambda1() * eta));
}

TEST_CASE("displacement along the top eigenvector aligns perfectly") {
  auto model = toy_product_loss();
  const Vector x = vec2(1.0, 1e-4);  // off-manifold along the normal
  PhiOptions popts;
  popts.top_k = 2;
  popts.tol = 1e-13;
  const PhiResult phi = estimate_phi(*model, x, popts);
  REQUIRE(phi.converged());
  const ManifoldObservables obs = observables(*model, x, 0.01, phi);
  CHECK(obs.theta <= 1e-8);
  CHECK(obs.alignment == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("degenerate manifold rank is an error") {
  auto model = toy_product_loss();
  PhiResult fake;
  fake.phi = vec2(1.0, 0.0);
  fake.spectral.eigenvalues = vec2(0.0, 0.0);
  fake.spectral.eigenvectors = Matrix::Identity(2, 2);
  CHECK_THROWS_AS(observables(*model, vec2(1.0, 0.1), 0.1, fake),
                  std::runtime_error);
}
