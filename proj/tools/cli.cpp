#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <random>

#include "orlicz/io.hpp"
#include "orlicz/modular.hpp"
#include "orlicz/nfunc.hpp"
#include "orlicz/numerics.hpp"
#include "orlicz/scenarios.hpp"
#include "orlicz/smooth.hpp"

namespace orlicz::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError(path + ": " + e.what());
  }
}

void write_text(const fs::path& file, const std::string& text) {
  fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << text;
}

// Resolved configuration: defaults, then a JSON file, then explicit flags.
class Params {
 public:
  explicit Params(std::string where) : where_(std::move(where)) {}

  template <class T>
  CLI::Option* add(CLI::App* app, const std::string& flag, const std::string& key, T value,
                   const std::string& help) {
    defaults_[key] = value;
    auto holder = std::make_shared<T>(value);
    holders_.push_back(holder);
    CLI::Option* opt = app->add_option(flag, *holder, help);
    overrides_.push_back([opt, holder, key](json& j) {
      if (opt->count() > 0) j[key] = *holder;
    });
    return opt;
  }

  void add_config(CLI::App* app) {
    app->add_option("--config", config_path_, "JSON configuration file; flags override it");
  }

  json resolve() const {
    json cfg = defaults_;
    if (!config_path_.empty()) {
      const json file = read_json_file(config_path_);
      if (!file.is_object()) throw UsageError(config_path_ + ": configuration must be an object");
      for (const auto& [k, v] : file.items()) {
        if (!defaults_.contains(k)) throw UsageError("unknown field '" + k + "' in " + where_ + " configuration");
        cfg[k] = v;
      }
    }
    for (const auto& f : overrides_) f(cfg);
    return cfg;
  }

 private:
  std::string where_;
  json defaults_ = json::object();
  std::string config_path_;
  std::vector<std::shared_ptr<void>> holders_;
  std::vector<std::function<void(json&)>> overrides_;
};

template <class T>
T get(const json& cfg, const char* key) {
  try {
    return cfg.at(key).get<T>();
  } catch (const json::exception&) {
    throw UsageError(std::string("field '") + key + "' is missing or has the wrong type");
  }
}

std::string output_root(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("ORLICZ_OUT_DIR"); env && *env) return env;
  return {};
}

NFunction parse_phi(const json& cfg) {
  try {
    return NFunction::parse(get<std::string>(cfg, "phi"));
  } catch (const DomainError& e) {
    throw UsageError(std::string("phi: ") + e.what());
  }
}

// Field from a registered recipe or a CSV file.
Field load_field(const json& cfg, const char* key) {
  const auto name = get<std::string>(cfg, key);
  const auto csv = get<std::string>(cfg, "csv");
  if (!csv.empty()) {
    std::ifstream in(csv);
    if (!in) throw UsageError("cannot open " + csv);
    std::optional<json> desc;
    const auto dpath = get<std::string>(cfg, "descriptor");
    if (!dpath.empty()) desc = read_json_file(dpath);
    return io::read_field_csv(in, desc, fs::path(csv).stem().string());
  }
  if (name.empty()) throw UsageError(std::string("either --") + key + " or --csv is required");
  return scenarios::make_field(name);
}

void add_field_options(Params& p, CLI::App* app, const std::string& key) {
  p.add(app, "--" + key, key, std::string{}, "registered field recipe");
  p.add(app, "--csv", "csv", std::string{}, "sampled field in CSV layout");
  p.add(app, "--descriptor", "descriptor", std::string{}, "JSON descriptor for --csv");
}

void add_quadrature_options(Params& p, CLI::App* app) {
  p.add(app, "--cells", "cells", 128, "midpoint cells per piece");
  p.add(app, "--singular", "singular", std::vector<double>{}, "singular points on --axis");
  p.add(app, "--breakpoint", "breakpoints", std::vector<double>{}, "breakpoints on --axis");
  p.add(app, "--grading-depth", "grading_depth", 0, "dyadic layers toward singular points");
  p.add(app, "--divergence-ratio", "divergence_ratio", 0.95, "tail ratio flagging divergence");
  p.add(app, "--axis", "axis", 0, "axis of singular points and breakpoints");
}

QuadratureSpec quadrature(const json& cfg) {
  QuadratureSpec q;
  q.cells = {get<int>(cfg, "cells")};
  const auto axis = get<std::size_t>(cfg, "axis");
  for (double s : get<std::vector<double>>(cfg, "singular")) q.singular.push_back({axis, s});
  for (double b : get<std::vector<double>>(cfg, "breakpoints")) q.breakpoints.push_back({axis, b});
  q.grading_depth = get<int>(cfg, "grading_depth");
  q.divergence_ratio = get<double>(cfg, "divergence_ratio");
  return q;
}

struct Emitter {
  std::ostream& out;
  std::string root;

  void emit(const std::string& command, const json& cfg, const json& report) const {
    out << report.dump(2) << '\n';
    if (root.empty()) return;
    const fs::path dir = fs::path(root) / command;
    write_text(dir / "config.json", cfg.dump(2) + "\n");
    write_text(dir / "report.json", report.dump(2) + "\n");
  }
};

json report_json(const VerificationReport& r) {
  return {{"name", r.name},           {"passed", r.passed},
          {"samples", r.samples},     {"violations", r.violations},
          {"max_excess", num(r.max_excess)}, {"detail", r.detail}};
}

std::vector<std::pair<double, double>> random_pairs(std::size_t n, double hi, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0.0, hi);
  std::vector<std::pair<double, double>> out(n);
  for (auto& p : out) {
    p.first = u(rng);
    p.second = u(rng);
  }
  return out;
}

}  // namespace

int run(const std::vector<std::string>& args_in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Orlicz-space numerical lab", "orlicz"};
  app.require_subcommand(1);
  int threads = 0;
  std::string out_flag;
  app.add_option("--threads", threads, "worker threads (0 = hardware)");
  app.add_option("--out", out_flag, "output directory (overrides ORLICZ_OUT_DIR)");

  // nfunc
  auto* nfunc = app.add_subcommand("nfunc", "N-function evaluation and checks");
  nfunc->require_subcommand(1);
  Params p_eval("nfunc eval");
  auto* eval = nfunc->add_subcommand("eval", "phi and its derivatives at points");
  p_eval.add(eval, "phi,--phi", "phi", std::string("exp_star"), "N-function descriptor");
  p_eval.add(eval, "--t", "t", std::vector<double>{0.0, 1.0, 2.0}, "evaluation points");
  p_eval.add_config(eval);

  Params p_verify("nfunc verify");
  auto* verify = nfunc->add_subcommand("verify", "property checks for phi");
  p_verify.add(verify, "phi,--phi", "phi", std::string("exp_star"), "N-function descriptor");
  p_verify.add(verify, "--k", "k", 0.0, "subadditivity constant (0 = known constant)");
  p_verify.add(verify, "--samples", "samples", std::size_t{10000}, "random pairs");
  p_verify.add(verify, "--t-max", "t_max", 50.0, "upper end of the sample range");
  p_verify.add(verify, "--seed", "seed", std::uint32_t{1}, "random seed");
  p_verify.add_config(verify);

  auto* tau0 = nfunc->add_subcommand("tau0", "threshold tau0 by bisection");

  Params p_delta2("nfunc delta2");
  auto* delta2 = nfunc->add_subcommand("delta2", "range-limited Delta_2 classification");
  p_delta2.add(delta2, "phi,--phi", "phi", std::string("exp_star"), "N-function descriptor");
  p_delta2.add(delta2, "--lo", "lo", 1.0, "lower end of the t range");
  p_delta2.add(delta2, "--hi", "hi", 50.0, "upper end of the t range");
  p_delta2.add(delta2, "--finite-measure", "finite_measure", true, "domain has finite measure");
  p_delta2.add(delta2, "--k-cap", "k_cap", 1e4, "ratio cap");
  p_delta2.add_config(delta2);

  // modular / norm / energy
  Params p_mod("modular");
  auto* mod = app.add_subcommand("modular", "N_phi(u / lambda)");
  p_mod.add(mod, "--phi", "phi", std::string("exp_star"), "N-function descriptor");
  add_field_options(p_mod, mod, "field");
  add_quadrature_options(p_mod, mod);
  p_mod.add(mod, "--lambda", "lambda", 1.0, "scale");
  p_mod.add_config(mod);

  Params p_norm("norm");
  auto* norm = app.add_subcommand("norm", "Luxemburg norm");
  p_norm.add(norm, "--phi", "phi", std::string("exp_star"), "N-function descriptor");
  add_field_options(p_norm, norm, "field");
  add_quadrature_options(p_norm, norm);
  p_norm.add(norm, "--tol", "tol", 1e-9, "relative bracket tolerance");
  p_norm.add_config(norm);

  Params p_energy("energy");
  auto* energy = app.add_subcommand("energy", "weighted energy of Db");
  p_energy.add(energy, "--phi", "phi", std::string("exp_star"), "N-function descriptor");
  add_field_options(p_energy, energy, "b");
  p_energy.add(energy, "--weight", "weight", std::string("one"), "weight recipe");
  add_quadrature_options(p_energy, energy);
  p_energy.add_config(energy);

  // smooth run
  auto* smooth_cmd = app.add_subcommand("smooth", "smoothing plans");
  smooth_cmd->require_subcommand(1);
  Params p_smooth("smooth run");
  auto* srun = smooth_cmd->add_subcommand("run", "choose radii, smooth, and report");
  p_smooth.add(srun, "--b", "b", std::string("tsin3x"), "registered space-time field");
  p_smooth.add(srun, "--phi", "phi", std::string("exp_star"), "N-function descriptor");
  p_smooth.add(srun, "--weight", "weight", std::string("one"), "weight recipe");
  p_smooth.add(srun, "--delta", "delta", 1e-2, "accuracy target");
  p_smooth.add(srun, "--j-max", "j_max", SmoothingOptions{}.j_max, "last ring of the cover");
  p_smooth.add(srun, "--floor-factor", "floor_factor", SmoothingOptions{}.floor_factor,
               "smallest radius as a multiple of delta");
  p_smooth.add(srun, "--jensen-points", "jensen_points", std::size_t{1000}, "audit points (0 skips)");
  p_smooth.add(srun, "--seed", "seed", std::uint32_t{7}, "seed for audit points");
  p_smooth.add(srun, "--sample", "sample", 32, "cells per axis of the sampled output field");
  p_smooth.add_config(srun);

  // scenario
  auto* scen = app.add_subcommand("scenario", "named experiments");
  scen->require_subcommand(1);
  auto* slist = scen->add_subcommand("list", "registered scenarios");
  auto* srun2 = scen->add_subcommand("run", "run a scenario");
  std::string scen_name;
  std::string scen_config;
  std::vector<std::string> scen_set;
  srun2->add_option("name", scen_name, "scenario name")->required();
  srun2->add_option("--config", scen_config, "JSON options file");
  srun2->add_option("--set", scen_set, "override key=value (value parsed as JSON when possible)");

  std::vector<std::string> args(args_in.rbegin(), args_in.rend());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (threads < 0) throw UsageError("--threads must be >= 0");
    if (threads > 0) numerics::set_thread_count(threads);
    const Emitter emitter{out, output_root(out_flag)};

    if (*eval) {
      const json cfg = p_eval.resolve();
      const NFunction phi = parse_phi(cfg);
      json rows = json::array();
      for (double t : get<std::vector<double>>(cfg, "t")) {
        json row = {{"t", t}};
        try {
          row["value"] = num(phi(t));
          row["deriv1"] = num(phi.deriv1(t));
          row["deriv2"] = num(phi.deriv2(t));
        } catch (const SaturationError&) {
          row["value"] = "saturated";
        }
        rows.push_back(row);
      }
      emitter.emit("nfunc_eval", cfg, {{"phi", phi.to_string()}, {"rows", rows}});
      return kOk;
    }
    if (*verify) {
      const json cfg = p_verify.resolve();
      const NFunction phi = parse_phi(cfg);
      const double t_max = get<double>(cfg, "t_max");
      const auto pairs = random_pairs(get<std::size_t>(cfg, "samples"), t_max,
                                      get<std::uint32_t>(cfg, "seed"));
      const auto der = check_derivatives(phi, 0.0, t_max);
      json report = {{"phi", phi.to_string()},
                     {"derivatives",
                      {{"max_rel1", der.max_rel1},
                       {"max_rel2", der.max_rel2},
                       {"worst_t1", der.worst_t1},
                       {"worst_t2", der.worst_t2},
                       {"passed", der.passed}}},
                     {"strictly_convex", phi.strictly_convex()}};
      bool passed = der.passed;
      double k = get<double>(cfg, "k");
      if (k <= 0.0) k = phi.known_subadditivity_constant().value_or(0.0);
      if (k > 0.0) {
        const auto sub = check_weak_subadditivity(phi, k, pairs);
        report["k"] = k;
        report["weak_subadditivity"] = report_json(sub);
        passed = passed && sub.passed;
      } else if (phi.family() != Family::ExpGammaTau) {
        throw UsageError("no known subadditivity constant for " + phi.to_string() + "; pass --k");
      }
      if (phi.family() == Family::ExpGammaTau || phi.family() == Family::ExpGammaTauStar) {
        const auto mult = check_submultiplicativity(phi.gamma(), phi.tau(), pairs);
        report["submultiplicativity"] = report_json(mult);
        passed = passed && mult.passed;
      }
      report["passed"] = passed;
      emitter.emit("nfunc_verify", cfg, report);
      return passed ? kOk : kScenarioFailed;
    }
    if (*tau0) {
      const double t = find_tau0();
      emitter.emit("nfunc_tau0", json::object(), {{"tau0", t}, {"defect", tau0_defect(t)}});
      return kOk;
    }
    if (*delta2) {
      const json cfg = p_delta2.resolve();
      const NFunction phi = parse_phi(cfg);
      const auto r = classify_delta2(phi, get<double>(cfg, "lo"), get<double>(cfg, "hi"),
                                     get<bool>(cfg, "finite_measure"), get<double>(cfg, "k_cap"));
      emitter.emit("nfunc_delta2", cfg,
                   {{"phi", phi.to_string()},
                    {"classification", std::string(delta2_class_name(r.classification))},
                    {"max_ratio", num(r.max_ratio)},
                    {"argmax", r.argmax},
                    {"upper_ratio", num(r.upper_ratio)},
                    {"ratio_growing", r.ratio_growing},
                    {"delta_regular", r.delta_regular},
                    {"lo", r.lo},
                    {"hi", r.hi}});
      return kOk;
    }
    if (*mod) {
      const json cfg = p_mod.resolve();
      const NFunction phi = parse_phi(cfg);
      const Field u = load_field(cfg, "field");
      const QuadratureSpec q = quadrature(cfg);
      const double lambda = get<double>(cfg, "lambda");
      if (!(lambda > 0.0)) throw UsageError("lambda must be positive");
      const auto m = DiscreteModular(u, q).at(phi, lambda);
      emitter.emit("modular", cfg,
                   {{"phi", phi.to_string()},
                    {"field", u.name()},
                    {"lambda", lambda},
                    {"value", num(m.value)},
                    {"diverged", m.diverged},
                    {"evaluations", m.evaluations},
                    {"quadrature", io::to_json(m.spec)}});
      return kOk;
    }
    if (*norm) {
      const json cfg = p_norm.resolve();
      const NFunction phi = parse_phi(cfg);
      const Field u = load_field(cfg, "field");
      const QuadratureSpec q = quadrature(cfg);
      json report = {{"phi", phi.to_string()}, {"field", u.name()}, {"quadrature", io::to_json(q)}};
      try {
        report["norm"] = num(luxemburg_norm(phi, u, q, get<double>(cfg, "tol")));
        report["bracket_failed"] = false;
      } catch (const BracketFailure& e) {
        report["norm"] = "inf";
        report["bracket_failed"] = true;
      }
      emitter.emit("norm", cfg, report);
      return kOk;
    }
    if (*energy) {
      const json cfg = p_energy.resolve();
      const NFunction phi = parse_phi(cfg);
      const Field b = load_field(cfg, "b");
      const Weight w = scenarios::make_weight(get<std::string>(cfg, "weight"), b.domain());
      const QuadratureSpec q = quadrature(cfg);
      const auto e = weighted_energy(phi, w, finite_diff_gradient(b), q);
      emitter.emit("energy", cfg,
                   {{"phi", phi.to_string()},
                    {"b", b.name()},
                    {"weight", get<std::string>(cfg, "weight")},
                    {"value", num(e.value)},
                    {"diverged", e.diverged},
                    {"evaluations", e.evaluations},
                    {"quadrature", io::to_json(e.spec)}});
      return kOk;
    }
    if (*srun) {
      const json cfg = p_smooth.resolve();
      const NFunction phi = parse_phi(cfg);
      const Field b = scenarios::make_field(get<std::string>(cfg, "b"));
      const Weight w = scenarios::make_weight(get<std::string>(cfg, "weight"), b.domain());
      SmoothingOptions opts;
      opts.j_max = get<int>(cfg, "j_max");
      opts.floor_factor = get<double>(cfg, "floor_factor");
      const double delta = get<double>(cfg, "delta");
      const auto ec = verify_energy_convergence(b, phi, w, {delta}, opts);
      const auto& plan = ec.plans.front();
      const fs::path dir = fs::path(emitter.root.empty() ? "orlicz-out" : emitter.root) / "smooth";
      write_text(dir / "config.json", cfg.dump(2) + "\n");
      write_text(dir / "plan.json", plan.to_json().dump(2) + "\n");
      write_text(dir / "report.csv", ec.report.to_csv());
      write_text(dir / "report.json", ec.report.to_json().dump(2) + "\n");
      const SmoothedField sf(b, plan);
      const auto cells = get<int>(cfg, "sample");
      if (cells > 0) {
        const Field sampled =
            sf.field().sample(GridShape{std::vector<int>(b.domain().dim(), cells)});
        std::ostringstream csv;
        io::write_field_csv(sampled, csv);
        write_text(dir / "b_delta.csv", csv.str());
        write_text(dir / "b_delta.json", io::field_descriptor(sampled).dump(2) + "\n");
      }
      json summary = {{"plan", plan.to_json()}, {"report", ec.report.to_json()},
                      {"directory", dir.string()}};
      bool ok = std::all_of(plan.ledger.begin(), plan.ledger.end(),
                            [](const BudgetEntry& e) { return e.satisfied(); });
      const auto points = get<std::size_t>(cfg, "jensen_points");
      if (points > 0) {
        const auto jr = check_jensen_step(sf, points, get<std::uint32_t>(cfg, "seed"));
        summary["jensen"] = report_json(jr);
        write_text(dir / "jensen.json", report_json(jr).dump(2) + "\n");
        ok = ok && jr.passed;
      }
      summary["budgets_satisfied"] = ok;
      out << summary.dump(2) << '\n';
      return ok ? kOk : kScenarioFailed;
    }
    if (*slist) {
      json arr = json::array();
      for (const auto& s : scenarios::list()) {
        arr.push_back({{"name", s.name}, {"summary", s.summary},
                       {"defaults", scenarios::default_config(s.name)}});
      }
      out << arr.dump(2) << '\n';
      return kOk;
    }
    if (*srun2) {
      json cfg = json::object();
      if (!scen_config.empty()) cfg = read_json_file(scen_config);
      if (!cfg.is_object()) throw UsageError("scenario configuration must be an object");
      for (const auto& kv : scen_set) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value");
        const std::string key = kv.substr(0, eq);
        const std::string value = kv.substr(eq + 1);
        json parsed = json::parse(value, nullptr, false);
        cfg[key] = parsed.is_discarded() ? json(value) : parsed;
      }
      const auto result = scenarios::run(scen_name, cfg);
      const fs::path dir = fs::path(emitter.root.empty() ? "orlicz-out" : emitter.root) / scen_name;
      scenarios::write_result(result, dir);
      for (const auto& e : result.expectations) {
        out << (e.passed ? "PASS " : "FAIL ") << e.quantity << ": " << e.detail << '\n';
      }
      out << "scenario " << scen_name << (result.passed() ? " passed" : " FAILED") << "; output in "
          << dir.string() << '\n';
      return result.passed() ? kOk : kScenarioFailed;
    }
  } catch (const PlanFailure& e) {
    err << "plan failure: ring j=" << e.ring() << ", budget " << e.budget() << ": " << e.what()
        << '\n';
    return kPlanFailed;
  } catch (const scenarios::ScenarioFailure& e) {
    err << "scenario failure: " << e.what() << '\n';
    return kScenarioFailed;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

}  // namespace orlicz::cli
