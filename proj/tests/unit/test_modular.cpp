#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "orlicz/modular.hpp"
#include "orlicz/scenarios.hpp"

using namespace orlicz;

namespace {
#include "modular_oracle.inc"

Field random_field(std::mt19937& rng, int n) {
  std::normal_distribution<double> g(0.0, 1.5);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = g(rng);
  return Field::sampled(Domain::interval(0.0, 1.0), GridShape{{n}}, Arity{}, v);
}

double discrete_pnorm(const Field& f, double p) {
  double s = 0.0;
  for (double x : f.samples()) s += std::pow(std::abs(x), p);
  return std::pow(s / static_cast<double>(f.samples().size()), 1.0 / p);
}
}  // namespace

TEST_SUITE("modular") {

TEST_CASE("modulars of recipes against quadrature reference") {
  for (const auto& c : kModularCases) {
    CAPTURE(c.phi);
    CAPTURE(c.field);
    const Field u = scenarios::make_field(c.field);
    QuadratureSpec q;
    q.cells = {128};
    q.grading_depth = 48;
    if (std::string(c.field) == "w1k_uprime") {
      q.singular = {{0, 0.0}};
      q.breakpoints = {{0, -std::exp(-1.0)}, {0, std::exp(-1.0)}};
    } else if (std::string(c.field) != "linear") {
      q.singular = {{0, 0.0}};
    }
    const auto v = modular(NFunction::parse(c.phi), u, q);
    CHECK_FALSE(v.diverged);
    CHECK(v.value == doctest::Approx(c.value).epsilon(1e-5));
  }
}

TEST_CASE("divergence at doubled scale") {
  QuadratureSpec q;
  q.cells = {128};
  q.singular = {{0, 0.0}};
  q.grading_depth = 48;
  const Field u = scenarios::make_field("example_ex_u");
  // exp(2|u|) = 1/x is not integrable.
  const auto v = modular(NFunction::exp_star().scaled(0.5), u, q);
  CHECK(v.diverged);
  CHECK(std::isinf(v.value));
  const auto fin = finite_at_scales(NFunction::exp_star(), u, std::vector<double>{0.5, 1.0, 2.0}, q);
  REQUIRE(fin.size() == 3);
  CHECK_FALSE(fin[0].second);
  CHECK(fin[1].second);
  CHECK(fin[2].second);
}

TEST_CASE("luxemburg under power p is the discrete p-norm") {
  std::mt19937 rng(2718);
  for (int k = 0; k < 20; ++k) {
    const Field f = random_field(rng, 16 + static_cast<int>(rng() % 100));
    for (double p : {1.0, 2.0, 4.0}) {
      const NFunction phi = NFunction::power(p);
      const double n = luxemburg_norm(phi, f, {});
      CHECK(n == doctest::Approx(discrete_pnorm(f, p)).epsilon(1e-6));
      std::vector<double> scaled = f.samples();
      for (auto& x : scaled) x *= -3.5;
      const Field g = Field::sampled(f.domain(), f.grid(), Arity{}, scaled);
      CHECK(luxemburg_norm(phi, g, {}) == doctest::Approx(3.5 * n).epsilon(2e-6));
    }
  }
}

TEST_CASE("property: triangle inequality and unit ball") {
  std::mt19937 rng(31);
  const NFunction phi = NFunction::exp_star();
  for (int k = 0; k < 10; ++k) {
    const Field f = random_field(rng, 64), g = random_field(rng, 64);
    std::vector<double> sum(64);
    for (int i = 0; i < 64; ++i) sum[i] = f.samples()[i] + g.samples()[i];
    const Field fg = Field::sampled(f.domain(), f.grid(), Arity{}, sum);
    const double nf = luxemburg_norm(phi, f, {}), ng = luxemburg_norm(phi, g, {});
    CHECK(luxemburg_norm(phi, fg, {}) <= (nf + ng) * (1 + 1e-8));
    // N(f / |f|) = 1 at the norm.
    CHECK(DiscreteModular(f, {}).at(phi, nf).value == doctest::Approx(1.0).epsilon(1e-7));
  }
}

TEST_CASE("convexity split") {
  const Domain d = Domain::interval(0.0, 1.0);
  const Field f = Field::scalar(d, [](const double* p) { return 3.0 * p[0]; });
  const Field g = Field::scalar(d, [](const double* p) { return std::cos(5.0 * p[0]); });
  CHECK(check_convexity_split(NFunction::exp_star(), f, g, {}).passed);
}

TEST_CASE("decreasing_below") {
  CHECK(decreasing_below(std::vector<double>{3.0, 2.0, 1e-4}, 1e-3));
  CHECK_FALSE(decreasing_below(std::vector<double>{3.0, 4.0, 1e-4}, 1e-3));
  CHECK_FALSE(decreasing_below(std::vector<double>{3.0, 2.0, 1e-2}, 1e-3));
  CHECK_FALSE(decreasing_below(std::vector<double>{3.0, INFINITY, 1e-4}, 1e-3));
}

TEST_CASE("classify_sequence on a shrinking perturbation") {
  const Domain d = Domain::interval(0.0, 1.0);
  const Field u = Field::scalar(d, [](const double* p) { return p[0]; });
  std::vector<Field> us;
  const std::vector<double> hs{1e1, 1e2, 1e3};
  for (double h : hs) {
    us.push_back(Field::scalar(d, [h](const double* p) { return p[0] + 1.0 / h; }));
  }
  const std::vector<double> lambdas{1.0};
  const auto r = classify_sequence(NFunction::exp_star(), us, u, lambdas, {}, 2e-3, hs);
  CHECK(r.flag("norm"));
  CHECK(r.flag("mean"));
  const auto& mean = r.column("mean");
  REQUIRE(mean.size() == 3);
  CHECK(mean[2] == doctest::Approx(std::expm1(1e-3)).epsilon(1e-12));
  // Luxemburg norm of the constant c on a unit interval: c / log(2).
  CHECK(r.column("norm")[0] == doctest::Approx(0.1 / std::log(2.0)).epsilon(1e-8));
}

}
