#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "orlicz/field.hpp"
#include "orlicz/modular.hpp"
#include "orlicz/nfunc.hpp"
#include "orlicz/smooth.hpp"

namespace orlicz::scenarios {

/// Scenario assertion did not hold.
class ScenarioFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One expected outcome with where its target comes from.
struct Expectation {
  std::string quantity;
  std::string kind;        // "value", "bound", "trend" or "flag"
  double target = 0.0;
  double tol = 0.0;
  double observed = 0.0;
  std::string provenance;  // closed_form, antiderivative, identity, run_audit, ...
  bool passed = false;
  std::string detail;

  nlohmann::json to_json() const;
};

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::string to_csv() const;
};

struct ScenarioResult {
  std::string name;
  nlohmann::json config;
  std::vector<Expectation> expectations;
  std::vector<std::pair<std::string, ConvergenceReport>> reports;
  std::vector<Table> tables;
  std::vector<std::pair<std::string, nlohmann::json>> documents;

  bool passed() const;
  nlohmann::json to_json() const;
};

/// Writes result.json, config.json, one CSV and JSON per report, one CSV
/// per table and one JSON per document. Output is byte-stable.
void write_result(const ScenarioResult& r, const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Recipes

struct FieldRecipe {
  std::string name;
  bool space_time = false;
  Domain domain;  // default domain
  std::string summary;
};

const std::vector<FieldRecipe>& field_recipes();
const FieldRecipe& field_recipe(const std::string& name);
/// Builds a registered field on q; throws DomainError for unknown names or
/// a domain of the wrong kind.
Field make_field(const std::string& name, const Domain& q);
Field make_field(const std::string& name);

std::vector<std::string> weight_recipes();
Weight make_weight(const std::string& name, const Domain& q);

/// b(t, x) = u(x) on (t_lo, t_hi) x Omega.
Field autonomous(const Field& u, double t_lo = 0.0, double t_hi = 1.0);

// ---------------------------------------------------------------------------
// Scenarios

struct ExampleExOptions {
  std::vector<double> h_ladder{1e2, 1e3, 1e4, 1e5, 1e6};
  int cells = 128;
  int grading_depth = 48;
  double integral_tol = 1e-4;
  double identity_tol = 2e-3;
  double mean_tol = 0.05;
};
ScenarioResult run_example_ex(const ExampleExOptions& o = {});

struct ExampleW1kOptions {
  int cells = 128;
  int grading_depth = 48;
  double exp_part_tol = 1e-4;
  double fd_step = 1e-6;
  double fd_tol = 1e-4;
};
ScenarioResult run_example_w1k(const ExampleW1kOptions& o = {});

struct SmoothingEnergyOptions {
  std::string b = "tsin3x";
  std::string phi = "exp_star";
  std::vector<std::string> weights{"one", "one_plus_x2"};
  std::vector<double> deltas{1e-1, 1e-2, 1e-3};
  double rel_tol = 1e-2;
  std::size_t jensen_points = 1000;
  std::uint32_t seed = 7;
  SmoothingOptions smoothing;
};
ScenarioResult run_smoothing_energy(const SmoothingEnergyOptions& o = {});

struct TimeMollificationOptions {
  std::string b = "sign_t_x";
  std::string phi = "exp_star";
  std::string weight = "one";
  std::vector<double> eps{0.2, 0.1, 0.05};
  int cells = 128;
  double slack = 1e-8;
};
ScenarioResult run_time_mollification(const TimeMollificationOptions& o = {});

struct EnergyToModularOptions {
  /// "smoothing": b_h from the smoothing delta ladder; "identity": b_h = b;
  /// "linear": b_h = b + x / h.
  std::string mode = "smoothing";
  std::string b = "tsin3x";
  std::string phi = "tilde_exp:gamma=0,tau=2*tau0";
  std::string weight = "one";
  std::vector<double> deltas{1e-1, 1e-2, 1e-3};
  std::vector<double> h_ladder{1e1, 1e2, 1e3};
  double tol = 1e-3;
  double lambda = 2.0;
  int cells = 64;
  SmoothingOptions smoothing;
};
ScenarioResult run_energy_to_modular(const EnergyToModularOptions& o = {});

struct OrliczSobolevOptions {
  std::string u = "x_log_inv_x";
  double gamma = 1.0;
  double tau = 0.0;  // 0 selects tau0
  std::vector<double> deltas{1e-1, 1e-2, 1e-3};
  double rel_tol = 1e-2;
  SmoothingOptions smoothing;
};
ScenarioResult run_orlicz_sobolev_demo(const OrliczSobolevOptions& o = {});

// ---------------------------------------------------------------------------
// Registry

struct ScenarioInfo {
  std::string name;
  std::string summary;
};
std::vector<ScenarioInfo> list();

/// Options of the named scenario with every default filled in.
nlohmann::json default_config(const std::string& name);

/// Runs the named scenario with config overriding the defaults. Unknown
/// scenario names or config fields raise DomainError.
ScenarioResult run(const std::string& name, const nlohmann::json& config = nlohmann::json::object());

nlohmann::json to_json(const SmoothingOptions& o);
SmoothingOptions smoothing_options_from_json(const nlohmann::json& j,
                                             SmoothingOptions base = {});

}  // namespace orlicz::scenarios
