#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {
struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = orlicz::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("orlicz-cli-" + name);
  fs::remove_all(d);
  return d;
}
}  // namespace

TEST_SUITE("cli") {

TEST_CASE("nfunc eval") {
  const auto r = cli({"nfunc", "eval", "--phi", "exp_star", "--t", "0", "1"});
  REQUIRE(r.code == orlicz::cli::kOk);
  const auto j = json::parse(r.out);
  CHECK(j["rows"][0]["value"] == 0.0);
  CHECK(j["rows"][1]["value"].get<double>() == doctest::Approx(1.718281828459045));
}

TEST_CASE("nfunc tau0 and verify") {
  const auto t = cli({"nfunc", "tau0"});
  REQUIRE(t.code == 0);
  CHECK(json::parse(t.out)["tau0"].get<double>() == doctest::Approx(11.339471999435947));
  CHECK(cli({"nfunc", "verify", "--phi", "exp_star:gamma=1,tau=tau0"}).code == 0);
  CHECK(cli({"nfunc", "verify", "--phi", "exp:gamma=1,tau=20"}).code == 0);
}

TEST_CASE("modular and norm") {
  const auto m = cli({"modular", "--phi", "power:p=2", "--field", "example_ex_u", "--singular",
                      "0", "--grading-depth", "48"});
  REQUIRE(m.code == 0);
  CHECK(json::parse(m.out)["value"].get<double>() == doctest::Approx(0.5).epsilon(1e-4));
  const auto n = cli({"norm", "--phi", "power:p=2", "--field", "linear"});
  REQUIRE(n.code == 0);
  CHECK(json::parse(n.out)["norm"].get<double>() ==
        doctest::Approx(std::sqrt(1.0 / 3.0)).epsilon(1e-4));
}

TEST_CASE("config file with flag override") {
  const fs::path dir = fresh_dir("config");
  fs::create_directories(dir);
  std::ofstream(dir / "c.json") << R"({"phi": "power:p=3", "t": [2.0]})";
  const auto r = cli({"nfunc", "eval", "--config", (dir / "c.json").string(), "--phi", "power:p=2"});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["rows"][0]["value"] == 4.0);
  std::ofstream(dir / "bad.json") << R"({"phi": "power:p=3", "bogus": 1})";
  CHECK(cli({"nfunc", "eval", "--config", (dir / "bad.json").string()}).code ==
        orlicz::cli::kUsage);
  fs::remove_all(dir);
}

TEST_CASE("usage errors") {
  CHECK(cli({}).code == orlicz::cli::kUsage);
  CHECK(cli({"nfunc", "eval", "--phi", "nope", "--t", "1"}).code == orlicz::cli::kUsage);
  CHECK(cli({"nfunc", "eval", "--bogus"}).code == orlicz::cli::kUsage);
  CHECK(cli({"scenario", "run", "example_w1k", "--set", "bogus=1"}).code == orlicz::cli::kUsage);
  CHECK(cli({"scenario", "run", "nope"}).code == orlicz::cli::kUsage);
}

TEST_CASE("scenario run writes its outputs") {
  const fs::path dir = fresh_dir("scenario");
  const auto r = cli({"--out", dir.string(), "scenario", "run", "example_w1k"});
  CHECK(r.code == orlicz::cli::kOk);
  CHECK(r.out.find("PASS") != std::string::npos);
  CHECK(fs::exists(dir / "example_w1k" / "result.json"));
  const auto f = cli({"--out", dir.string(), "scenario", "run", "example_ex", "--set",
                      "mean_tol=1e-6"});
  CHECK(f.code == orlicz::cli::kScenarioFailed);
  CHECK(f.out.find("FAIL") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("smooth run plan failure exit code") {
  const fs::path dir = fresh_dir("smooth");
  const auto r = cli({"--out", dir.string(), "smooth", "run", "--b", "tsin3x", "--delta", "0.1",
                      "--floor-factor", "0.3"});
  CHECK(r.code == orlicz::cli::kPlanFailed);
  CHECK(r.err.find("plan failure") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("smooth run writes plan and report") {
  const fs::path dir = fresh_dir("smooth-ok");
  const auto r = cli({"--out", dir.string(), "smooth", "run", "--b", "tsin3x", "--delta", "0.1",
                      "--j-max", "5"});
  REQUIRE(r.code == orlicz::cli::kOk);
  for (const char* f : {"plan.json", "report.csv", "report.json", "b_delta.csv", "jensen.json"}) {
    CAPTURE(f);
    CHECK(fs::exists(dir / "smooth" / f));
  }
  fs::remove_all(dir);
}

}
