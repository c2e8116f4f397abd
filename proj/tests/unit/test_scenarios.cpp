#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "orlicz/scenarios.hpp"

using namespace orlicz;
namespace fs = std::filesystem;

namespace {
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("orlicz-test-" + name);
  fs::remove_all(d);
  return d;
}
}  // namespace

TEST_SUITE("scenarios") {

TEST_CASE("recipes build on their default domains") {
  for (const auto& r : scenarios::field_recipes()) {
    CAPTURE(r.name);
    const Field f = scenarios::make_field(r.name);
    CHECK(f.domain() == r.domain);
    CHECK(r.domain.kind() == (r.space_time ? DomainKind::SpaceTimeBox : DomainKind::Interval1D));
  }
  CHECK_THROWS_AS(scenarios::make_field("nope"), DomainError);
  CHECK_THROWS_AS(scenarios::make_field("tsin3x", Domain::interval(0.0, 1.0)), DomainError);
  CHECK_THROWS_AS(scenarios::make_weight("nope", Domain::box(0, 1, 0, 1)), DomainError);
}

TEST_CASE("w1k recipe derivative matches a central difference") {
  const Field u = scenarios::make_field("w1k_u");
  const Field up = scenarios::make_field("w1k_uprime");
  for (double x : {-0.3, -0.1, -1e-3, 1e-3, 0.05, 0.2, 0.35}) {
    const double h = 1e-7;
    const double a = x + h, b = x - h;
    const double fd = (u.value(&a) - u.value(&b)) / (2 * h);
    CHECK(fd == doctest::Approx(up.value(&x)).epsilon(1e-6));
  }
  const double outside = 0.5;
  CHECK(u.value(&outside) == 0.0);
  CHECK(up.value(&outside) == 0.0);
}

TEST_CASE("autonomous extension") {
  const Field u = scenarios::make_field("x_log_inv_x");
  const Field b = scenarios::autonomous(u, 0.0, 2.0);
  CHECK(b.domain().kind() == DomainKind::SpaceTimeBox);
  const double p[2] = {1.7, 0.25}, x = 0.25;
  CHECK(b.value(p) == u.value(&x));
}

TEST_CASE("registry and config round trip") {
  const auto names = scenarios::list();
  CHECK(names.size() == 6);
  for (const auto& s : names) {
    CAPTURE(s.name);
    const auto cfg = scenarios::default_config(s.name);
    CHECK(cfg.is_object());
    auto bad = cfg;
    bad["no_such_field"] = 1;
    CHECK_THROWS_AS(scenarios::run(s.name, bad), DomainError);
  }
  CHECK_THROWS_AS(scenarios::run("nope"), DomainError);

  SmoothingOptions o;
  o.j_max = 6;
  o.floor_factor = 1e-9;
  o.audit_refine = 2;
  const auto back = scenarios::smoothing_options_from_json(scenarios::to_json(o));
  CHECK(scenarios::to_json(back) == scenarios::to_json(o));
}

TEST_CASE("example_w1k") {
  const auto r = scenarios::run("example_w1k");
  for (const auto& e : r.expectations) {
    CAPTURE(e.quantity);
    CHECK(e.passed);
  }
  // exp-part closed form 4 e^{-3/2}.
  bool found = false;
  for (const auto& e : r.expectations) {
    if (e.kind == "value" && e.provenance == "antiderivative") {
      CHECK(e.target == doctest::Approx(4.0 * std::exp(-1.5)));
      found = true;
    }
  }
  CHECK(found);
}

TEST_CASE("example_ex") {
  const auto r = scenarios::run_example_ex();
  CHECK(r.passed());
  REQUIRE(r.reports.size() == 1);
  const auto& rep = r.reports.front().second;
  const auto& mean = rep.column("mean");
  for (std::size_t i = 1; i < mean.size(); ++i) CHECK(mean[i] < mean[i - 1]);
  const auto& gap = rep.column("energy_gap");
  for (std::size_t i = 0; i < gap.size(); ++i) {
    CHECK(gap[i] > 1.0);
    if (i) CHECK(gap[i] < gap[i - 1]);
  }
}

TEST_CASE("failing expectation is reported, not thrown") {
  scenarios::ExampleExOptions o;
  o.mean_tol = 1e-6;
  const auto r = scenarios::run_example_ex(o);
  CHECK_FALSE(r.passed());
}

TEST_CASE("time_mollification") {
  const auto r = scenarios::run("time_mollification");
  CHECK(r.passed());
}

TEST_CASE("write_result is byte-stable") {
  const auto r = scenarios::run("example_w1k");
  const fs::path a = fresh_dir("a"), b = fresh_dir("b");
  scenarios::write_result(r, a);
  scenarios::write_result(scenarios::run("example_w1k"), b);
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    ++files;
    CAPTURE(entry.path().filename().string());
    CHECK(slurp(entry.path()) == slurp(b / entry.path().filename()));
  }
  CHECK(files >= 3);
  CHECK(fs::exists(a / "result.json"));
  CHECK(fs::exists(a / "modulars.csv"));
  fs::remove_all(a);
  fs::remove_all(b);
}

}
