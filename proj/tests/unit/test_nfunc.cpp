#include <doctest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "orlicz/nfunc.hpp"

using namespace orlicz;

namespace {
#include "nfunc_oracle.inc"

double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

std::vector<std::pair<double, double>> random_pairs(std::mt19937& rng, std::size_t n,
                                                    double hi) {
  std::uniform_real_distribution<double> u(0.0, hi);
  std::vector<std::pair<double, double>> out(n);
  for (auto& p : out) p = {u(rng), u(rng)};
  return out;
}

const char* kFamilies[] = {"exp_star",
                           "exp_alpha:alpha=0.5",
                           "power:p=1",
                           "power:p=2.5",
                           "exp_star:gamma=0,tau=tau0",
                           "exp_star:gamma=0.5,tau=tau0",
                           "exp_star:gamma=1,tau=2*tau0",
                           "tilde_exp:gamma=0,tau=tau0",
                           "tilde_exp:gamma=1,tau=tau0",
                           "tilde_exp:gamma=0.5,tau=2*tau0",
                           "exp_star:lambda=3"};
}  // namespace

TEST_SUITE("nfunc") {

TEST_CASE("tau0 root") {
  const double t = find_tau0();
  CHECK(t > 11.0);
  CHECK(t < 12.0);
  CHECK(std::abs(tau0_defect(t)) <= 1e-9);
  CHECK(t == doctest::Approx(kTau0).epsilon(1e-12));
}

TEST_CASE("values and derivatives against high-precision reference") {
  for (const auto& c : kNfuncCases) {
    const std::string name = c.phi;
    CAPTURE(name);
    CAPTURE(c.t);
    const NFunction phi = NFunction::parse(c.phi);
    CHECK(rel_err(phi(c.t), c.value) < 1e-12);
    CHECK(rel_err(phi.deriv1(c.t), c.d1) < 1e-11);
    CHECK(rel_err(phi.deriv2(c.t), c.d2) < 1e-10);
  }
}

TEST_CASE("tilde_exp at gamma 0 is exp minus one minus t") {
  const NFunction phi = NFunction::tilde_exp(0.0, 2.0 * find_tau0());
  for (double t : {0.7, 5.0, 30.0}) {
    CHECK(rel_err(phi(t), std::expm1(t) - t) < 1e-13);
  }
  // expm1(t) - t cancels for small t; compare with the Taylor tail.
  for (double t : {1e-8, 1e-5, 1e-3}) {
    double term = t * t / 2, sum = 0.0;
    for (int k = 3; k < 10; ++k) {
      sum += term;
      term *= t / k;
    }
    CHECK(rel_err(phi(t), sum) < 1e-14);
  }
}

TEST_CASE("exp_gamma_tau is one at zero, the others vanish") {
  CHECK(NFunction::exp_gamma_tau(1.0, find_tau0())(0.0) == 1.0);
  CHECK_FALSE(NFunction::exp_gamma_tau(1.0, find_tau0()).vanishes_at_zero());
  for (const char* d : kFamilies) {
    const std::string name = d;
    CAPTURE(name);
    CHECK(NFunction::parse(d)(0.0) == 0.0);
  }
}

TEST_CASE("descriptor round trip") {
  for (const char* d : kFamilies) {
    const std::string name = d;
    CAPTURE(name);
    const NFunction a = NFunction::parse(d);
    const NFunction b = NFunction::parse(a.to_string());
    CHECK(a.to_string() == b.to_string());
    for (double t : {0.0, 0.3, 4.0, 17.0}) CHECK(a(t) == b(t));
  }
}

TEST_CASE("malformed descriptors") {
  for (const char* d : {"", "nope", "exp", "exp:gamma=1", "power:p=x", "power:p=2,q=1",
                        "exp_star:gamma=1", "power:p=2,p=3", "tilde_exp:gamma=1,tau=abc"}) {
    const std::string name = d;
    CAPTURE(name);
    CHECK_THROWS_AS(NFunction::parse(d), DomainError);
  }
  CHECK_THROWS_AS(NFunction::exp_star()(-1.0), DomainError);
}

TEST_CASE("saturation raises") {
  CHECK_THROWS_AS(NFunction::exp_star()(800.0), SaturationError);
  CHECK(std::isfinite(NFunction::exp_star()(700.0)));
}

TEST_CASE("finite-difference derivative check") {
  const double tau0 = find_tau0();
  for (double g : {0.0, 0.5, 1.0}) {
    for (double tau : {tau0, 2.0 * tau0}) {
      for (const auto& phi : {NFunction::exp_gamma_tau_star(g, tau), NFunction::tilde_exp(g, tau)}) {
        CAPTURE(phi.to_string());
        const auto r = check_derivatives(phi, 0.0, 50.0);
        CHECK(r.passed);
        CHECK(r.max_rel1 <= 1e-5);
        CHECK(r.max_rel2 <= 1e-4);
      }
    }
  }
}

TEST_CASE("convexity at tau0 + 0.5") {
  const double tau = find_tau0() + 0.5;
  for (double g : {0.5, 1.0}) {
    const NFunction phi = NFunction::exp_gamma_tau(g, tau);
    for (int i = 0; i < 500; ++i) {
      const double t = 50.0 * (i + 0.5) / 500.0;
      CHECK(phi.deriv1(t) > 0.0);
      CHECK(phi.deriv2(t) > 0.0);
    }
  }
}

TEST_CASE("weak subadditivity with k = 1") {
  std::mt19937 rng(20240601);
  const auto sample = random_pairs(rng, 10000, 50.0);
  const double tau0 = find_tau0();
  for (double g : {0.0, 0.5, 1.0}) {
    for (double tau : {tau0, 2.0 * tau0}) {
      const NFunction phi = NFunction::exp_gamma_tau_star(g, tau);
      CAPTURE(phi.to_string());
      REQUIRE(phi.known_subadditivity_constant().has_value());
      const auto r = check_weak_subadditivity(phi, 1.0, sample);
      CHECK(r.passed);
      CHECK(r.violations == 0);
      CHECK(r.samples == sample.size());
    }
  }
}

TEST_CASE("weak subadditivity detects a violation") {
  // With k = 1/4 the inequality fails at a = b = 1 for exp_star.
  const std::vector<std::pair<double, double>> sample{{1.0, 1.0}};
  const auto r = check_weak_subadditivity(NFunction::exp_star(), 0.25, sample);
  CHECK_FALSE(r.passed);
  CHECK(r.violations == 1);
}

TEST_CASE("submultiplicativity of exp_gamma_tau") {
  std::mt19937 rng(99);
  const auto sample = random_pairs(rng, 5000, 50.0);
  for (double g : {0.5, 1.0}) {
    CHECK(check_submultiplicativity(g, find_tau0(), sample).passed);
  }
}

TEST_CASE("property: convexity and monotonicity on random points") {
  std::mt19937 rng(12345);
  std::uniform_real_distribution<double> u(0.0, 40.0), s(0.0, 1.0);
  for (const char* d : kFamilies) {
    const NFunction phi = NFunction::parse(d);
    const std::string name = d;
    CAPTURE(name);
    for (int i = 0; i < 500; ++i) {
      const double a = u(rng), b = u(rng), th = s(rng);
      const double mix = phi(th * a + (1 - th) * b);
      const double chord = th * phi(a) + (1 - th) * phi(b);
      CHECK(mix <= chord * (1 + 1e-12) + 1e-300);
      CHECK(phi(std::max(a, b)) >= phi(std::min(a, b)));
    }
  }
}

TEST_CASE("scaled generator") {
  const NFunction phi = NFunction::exp_star().scaled(2.0);
  CHECK(phi(2.0) == doctest::Approx(std::expm1(1.0)));
  CHECK(phi.deriv1(2.0) == doctest::Approx(std::exp(1.0) / 2.0));
  CHECK(phi.deriv2(2.0) == doctest::Approx(std::exp(1.0) / 4.0));
  CHECK_THROWS_AS(NFunction::exp_star().scaled(0.0), DomainError);
}

TEST_CASE("delta2 classification") {
  CHECK(classify_delta2(NFunction::power(2.0), 0.01, 100.0, false).classification ==
        Delta2Class::Global);
  const auto e = classify_delta2(NFunction::exp_star(), 0.01, 50.0, true);
  CHECK(e.classification == Delta2Class::NoneOnRange);
  CHECK_FALSE(e.delta_regular);
}

}
