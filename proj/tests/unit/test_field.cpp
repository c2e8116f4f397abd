#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "orlicz/field.hpp"
#include "orlicz/io.hpp"
#include "orlicz/nfunc.hpp"

using namespace orlicz;

TEST_SUITE("field") {

TEST_CASE("domains") {
  const Domain d = Domain::box(0.0, 2.0, -1.0, 1.0);
  CHECK(d.kind() == DomainKind::SpaceTimeBox);
  CHECK(d.dim() == 2);
  CHECK(d.spatial_dim() == 1);
  CHECK(d.volume() == doctest::Approx(4.0));
  const double in[2] = {1.0, 0.0}, out[2] = {3.0, 0.0};
  CHECK(d.contains(in));
  CHECK_FALSE(d.contains(out));
  CHECK(d.contains(Domain::box(0.5, 1.0, 0.0, 0.5)));
  CHECK_THROWS(Domain::interval(1.0, 0.0));
  CHECK_THROWS_AS(restrict(Field::constant(d, 1.0), Domain::box(0.0, 3.0, 0.0, 1.0)),
                  ContainmentError);
}

TEST_CASE("midpoint quadrature of a polynomial") {
  const Domain d = Domain::interval(0.0, 1.0);
  QuadratureSpec q;
  q.cells = {200};
  const auto r = integrate(Field::scalar(d, [](const double* p) { return p[0] * p[0]; }), q);
  // Midpoint rule error for x^2 is h^2 / 12 exactly.
  CHECK(r.value == doctest::Approx(1.0 / 3.0 - 1.0 / (12.0 * 200 * 200)).epsilon(1e-13));
  CHECK_FALSE(r.diverged);
}

TEST_CASE("graded quadrature of an integrable singularity") {
  const Domain d = Domain::interval(0.0, 1.0);
  QuadratureSpec q;
  q.cells = {64};
  q.singular = {{0, 0.0}};
  q.grading_depth = 48;
  const auto r = integrate(Field::scalar(d, [](const double* p) { return -std::log(p[0]); }), q);
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-5));
  CHECK_FALSE(r.diverged);
  const auto bad = integrate(Field::scalar(d, [](const double* p) { return 1.0 / p[0]; }), q);
  CHECK(bad.diverged);
}

TEST_CASE("breakpoints integrate a jump exactly") {
  const Domain d = Domain::box(0.0, 1.0, 0.0, 1.0);
  QuadratureSpec q;
  q.cells = {7};
  q.breakpoints = {{0, 0.3}};
  const auto r =
      integrate(Field::scalar(d, [](const double* p) { return p[0] < 0.3 ? 1.0 : 0.0; }), q);
  CHECK(r.value == doctest::Approx(0.3).epsilon(1e-14));
}

TEST_CASE("sampled gradient is exact for affine data") {
  const Domain d = Domain::box(0.0, 1.0, 0.0, 2.0);
  const Field f = Field::scalar(d, [](const double* p) { return 3.0 * p[0] - 2.0 * p[1]; });
  const Field s = f.sample(GridShape{{8, 16}});
  const Field g = finite_diff_gradient(s);
  CHECK(g.arity() == Arity{1, 1});
  const double p[2] = {0.51, 1.97};
  CHECK(g.value(p) == doctest::Approx(-2.0).epsilon(1e-12));
  const Field gt = finite_diff_gradient(s, {0});
  CHECK(gt.value(p) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("registered gradient is preferred") {
  const Domain d = Domain::interval(0.0, 1.0);
  const Field f = Field::scalar(d, [](const double* p) { return std::sin(p[0]); })
                      .with_gradient(Field::scalar(d, [](const double*) { return 42.0; }));
  const double p[1] = {0.5};
  CHECK(finite_diff_gradient(f).value(p) == 42.0);
  const Field plain = Field::scalar(d, [](const double* p) { return std::sin(p[0]); });
  CHECK(finite_diff_gradient(plain).value(p) == doctest::Approx(std::cos(0.5)).epsilon(1e-8));
}

TEST_CASE("weights reject nonpositive values") {
  const Domain d = Domain::box(0.0, 1.0, -1.0, 1.0);
  CHECK_THROWS_AS(Weight(Field::scalar(d, [](const double* p) { return p[1]; })).scan(),
                  DomainError);
  const auto b = Weight(Field::scalar(d, [](const double* p) { return 1.0 + p[1] * p[1]; })).scan();
  CHECK(b.min >= 1.0);
  CHECK(b.max <= 2.0);
}

TEST_CASE("sampled fields reject non-finite values") {
  CHECK_THROWS(Field::sampled(Domain::interval(0.0, 1.0), GridShape{{2}}, Arity{},
                              {1.0, std::nan("")}));
  CHECK_THROWS(Field::sampled(Domain::interval(0.0, 1.0), GridShape{{3}}, Arity{}, {1.0, 2.0}));
}

}

TEST_SUITE("io") {

TEST_CASE("format_double round trips") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    CHECK(std::stod(io::format_double(v)) == v);
  }
  CHECK(io::format_double(0.5) == "0.5");
}

TEST_CASE("csv round trip with and without descriptor") {
  const Domain d = Domain::box(0.0, 1.0, -1.0, 1.0);
  const Field s =
      Field::scalar(d, [](const double* p) { return p[0] * std::sin(3.0 * p[1]); }).sample({{5, 8}});
  std::stringstream buf;
  io::write_field_csv(s, buf);
  const std::string text = buf.str();

  std::stringstream a(text);
  const Field r1 = io::read_field_csv(a, io::field_descriptor(s));
  CHECK(r1.samples() == s.samples());
  CHECK(r1.domain() == s.domain());

  std::stringstream b(text);
  const Field r2 = io::read_field_csv(b);
  CHECK(r2.grid().cells == s.grid().cells);
  CHECK(r2.domain().axis(1).lo == doctest::Approx(-1.0));
  CHECK(r2.domain().axis(0).hi == doctest::Approx(1.0));
  for (std::size_t i = 0; i < s.samples().size(); ++i) {
    CHECK(r2.samples()[i] == s.samples()[i]);
  }
}

TEST_CASE("quadrature spec json round trip") {
  QuadratureSpec q;
  q.cells = {32, 64};
  q.singular = {{1, 0.0}};
  q.breakpoints = {{0, 0.25}};
  q.grading_depth = 12;
  q.divergence_ratio = 0.9;
  const auto back = io::quadrature_from_json(io::to_json(q));
  CHECK(io::to_json(back) == io::to_json(q));
  const Domain d = Domain::box(0.0, 1.0, 0.0, 2.0);
  CHECK(io::domain_from_json(io::to_json(d)) == d);
}

TEST_CASE("malformed csv") {
  std::stringstream a("t,x,u\n0.5,0.5\n");
  CHECK_THROWS(io::read_field_csv(a));
  std::stringstream b("x,u\n0.1,1\n0.2,2\n0.7,3\n");
  CHECK_THROWS(io::read_field_csv(b));
}

}
