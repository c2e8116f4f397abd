#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "orlicz/scenarios.hpp"
#include "orlicz/smooth.hpp"

using namespace orlicz;

namespace {
#include "mollifier_oracle.inc"

const Domain kUnitBox = Domain::box(0.0, 1.0, 0.0, 1.0);

std::vector<std::array<double, 2>> random_points(const Domain& box, std::size_t n,
                                                 std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> t(box.axis(0).lo, box.axis(0).hi);
  std::uniform_real_distribution<double> x(box.axis(1).lo, box.axis(1).hi);
  std::vector<std::array<double, 2>> out(n);
  for (auto& p : out) p = {t(rng), x(rng)};
  return out;
}
}  // namespace

TEST_SUITE("smooth") {

TEST_CASE("smooth step") {
  CHECK(smooth_step(-1.0) == 0.0);
  CHECK(smooth_step(-3.0) == 0.0);
  CHECK(smooth_step(1.0) == 1.0);
  CHECK(smooth_step(0.0) == doctest::Approx(0.5));
  double prev = 0.0;
  for (int i = 0; i <= 200; ++i) {
    const double u = -1.0 + i / 100.0;
    const double s = smooth_step(u);
    CHECK(s >= prev);
    CHECK(smooth_step(-u) == doctest::Approx(1.0 - s).epsilon(1e-14));
    prev = s;
    if (std::abs(u) < 0.99) {
      double ds = 0.0;
      smooth_step(u, &ds);
      const double h = 1e-6;
      CHECK(ds == doctest::Approx((smooth_step(u + h) - smooth_step(u - h)) / (2 * h)).epsilon(1e-6));
    }
  }
}

TEST_CASE("mollifier normalization and weights") {
  for (std::size_t d = 1; d <= 3; ++d) {
    CHECK(Mollifier::normalization(d) == doctest::Approx(kMollifierC[d]).epsilon(1e-9));
  }
  const Mollifier m(0.1, 2);
  double s = 0.0, mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < m.size(); ++k) {
    CHECK(m.weight(k) >= 0.0);
    const double* z = m.offset(k);
    CHECK(z[0] * z[0] + z[1] * z[1] < 0.01);
    s += m.weight(k);
    mx += m.weight(k) * z[0];
    my += m.weight(k) * z[1];
  }
  CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(mx) < 1e-15);
  CHECK(std::abs(my) < 1e-15);
  const double zero[2] = {0.0, 0.0}, edge[2] = {0.1, 0.0};
  CHECK(m.kernel(zero) == doctest::Approx(kMollifierC[2] * std::exp(-1.0) / 0.01));
  CHECK(m.kernel(edge) == 0.0);
  const Mollifier tm(0.1, 2, Mollifier::Variant::TimeOnly);
  for (std::size_t k = 0; k < tm.size(); ++k) CHECK(tm.offset(k)[1] == 0.0);
}

TEST_CASE("cover") {
  CHECK_THROWS_AS(build_cover(kUnitBox, 2), DomainError);
  const ExhaustionCover c = build_cover(kUnitBox, 8);
  // dist > 1/j is empty on the unit box for j <= 2, so ring 1 is empty.
  CHECK(c.empty_rings() == std::vector<int>{1});
  CHECK(c.rings().front() == 2);
  CHECK(c.rings().back() == 8);
  const auto a = c.audit(0.15, 64);
  CHECK(a.uncovered == 0);
  CHECK(a.max_multiplicity <= 2);
}

TEST_CASE("partition of unity sums to one with bounded overlap") {
  const PartitionOfUnity pu = build_partition(build_cover(kUnitBox, 8), 0.25);
  const Domain box = pu.covered_box();
  PartitionOfUnity::Active act[8];
  int worst = 0;
  double err = 0.0;
  for (const auto& p : random_points(box, 1000, 11)) {
    REQUIRE(pu.covered(p.data()));
    err = std::max(err, std::abs(pu.zeta_sum(p.data()) - 1.0));
    const int n = pu.evaluate(p.data(), act);
    worst = std::max(worst, n);
    double gs = 0.0;
    for (int i = 0; i < n; ++i) {
      CHECK(act[i].zeta > 0.0);
      CHECK(pu.cover().in_ring(act[i].j, p.data()));
      gs += act[i].grad[1];
    }
    CHECK(std::abs(gs) < 1e-9);
  }
  CHECK(err <= 1e-10);
  CHECK(worst <= 4);
}

TEST_CASE("cutoff is one on its ring") {
  const PartitionOfUnity pu = build_partition(build_cover(kUnitBox, 8), 0.25);
  for (const auto& p : random_points(kUnitBox, 2000, 3)) {
    for (int j : pu.cover().rings()) {
      if (pu.cover().in_ring(j, p.data())) CHECK(pu.psi(j, p.data(), nullptr) == 1.0);
    }
  }
}

TEST_CASE("smoothing reproduces affine data") {
  const Field b = scenarios::make_field("linear_x");
  const Weight w = scenarios::make_weight("one", b.domain());
  SmoothingOptions o;
  o.j_max = 5;
  const auto plan = choose_radii(b, NFunction::exp_star(), w, 0.1, o);
  const auto s = smooth(b, plan);
  SmoothedField::Parts parts;
  for (const auto& p : random_points(plan.partition->covered_box(), 200, 8)) {
    s.evaluate(p.data(), parts);
    CHECK(parts.b[0] == doctest::Approx(p[1]).epsilon(1e-12));
    CHECK(parts.db[0] == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("smoothing of tsin3x meets its budgets") {
  const Field b = scenarios::make_field("tsin3x");
  const NFunction phi = NFunction::exp_star();
  for (const char* wname : {"one", "one_plus_x2"}) {
    CAPTURE(wname);
    const Weight w = scenarios::make_weight(wname, b.domain());
    const double delta = 0.1;
    const auto plan = choose_radii(b, phi, w, delta);
    for (const auto& e : plan.ledger) {
      CAPTURE(e.j);
      CHECK(e.satisfied());
      CHECK(e.eps <= delta / 2);
    }
    const auto snap = snapshot(b, w, plan);
    CHECK(snap.db_l1() <= delta);
    CHECK(snap.z_sup() < delta / 2);
    CHECK(check_jensen_step(b, plan, phi, 1000, 7).passed);
    CHECK(check_domination(snap, phi, 1.0).passed);
    CHECK(plan.to_json()["rings"].size() == plan.ledger.size());
  }
}

TEST_CASE("floor radius raises PlanFailure") {
  const Field b = scenarios::make_field("tsin3x");
  SmoothingOptions o;
  o.floor_factor = 0.3;
  try {
    choose_radii(b, NFunction::exp_star(), scenarios::make_weight("one", b.domain()), 0.1, o);
    FAIL("expected PlanFailure");
  } catch (const PlanFailure& e) {
    CHECK(e.ring() >= 2);
    CHECK_FALSE(e.budget().empty());
  }
}

TEST_CASE("time mollification") {
  const Field b = scenarios::make_field("linear_x");
  const Field m = time_mollify(b, 0.1);
  // Away from the time boundary, x-only data is reproduced.
  for (const auto& p : random_points(Domain::box(0.2, 0.8, 0.0, 1.0), 100, 4)) {
    CHECK(m.value(p.data()) == doctest::Approx(p[1]).epsilon(1e-12));
  }
  const Field s = time_mollify(scenarios::make_field("sign_t_x"), 0.1);
  for (const auto& p : random_points(kUnitBox, 200, 5)) {
    CHECK(std::abs(s.value(p.data())) <= p[1] + 1e-14);
  }
  const double early[2] = {0.1, 0.5}, late[2] = {0.9, 0.5};
  CHECK(s.value(early) == doctest::Approx(-0.5));
  CHECK(s.value(late) == doctest::Approx(0.5));
}

}
