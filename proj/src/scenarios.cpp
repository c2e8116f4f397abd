#include "orlicz/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

#include "orlicz/io.hpp"
#include "orlicz/numerics.hpp"

namespace orlicz::scenarios {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

json num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

void reject_unknown(const json& j, const json& defaults, const std::string& where) {
  if (!j.is_object()) throw DomainError(where + " config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) throw DomainError("unknown field '" + key + "' in " + where);
  }
}

template <class T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception&) {
      throw DomainError(std::string("field '") + key + "' has the wrong type");
    }
  }
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] < v[i - 1])) return false;
  }
  return true;
}

void require_increasing(const std::vector<double>& v, const char* what) {
  if (v.empty()) throw DomainError(std::string(what) + " is empty");
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] > v[i - 1])) throw DomainError(std::string(what) + " must increase");
  }
}

void require_decreasing(const std::vector<double>& v, const char* what) {
  if (v.empty()) throw DomainError(std::string(what) + " is empty");
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] > 0.0)) throw DomainError(std::string(what) + " entries must be positive");
    if (i && !(v[i] < v[i - 1])) throw DomainError(std::string(what) + " must decrease");
  }
}

Expectation value_check(std::string quantity, double observed, double target, double tol,
                        std::string provenance) {
  Expectation e;
  e.quantity = std::move(quantity);
  e.kind = "value";
  e.observed = observed;
  e.target = target;
  e.tol = tol;
  e.provenance = std::move(provenance);
  e.passed = std::abs(observed - target) <= tol;
  e.detail = "|" + io::format_double(observed) + " - " + io::format_double(target) +
             "| = " + io::format_double(std::abs(observed - target));
  return e;
}

// observed <= target + tol.
Expectation bound_check(std::string quantity, double observed, double target, double tol,
                        std::string provenance) {
  Expectation e;
  e.quantity = std::move(quantity);
  e.kind = "bound";
  e.observed = observed;
  e.target = target;
  e.tol = tol;
  e.provenance = std::move(provenance);
  e.passed = observed <= target + tol;
  e.detail = io::format_double(observed) + " <= " + io::format_double(target) + " + " +
             io::format_double(tol);
  return e;
}

Expectation flag_check(std::string quantity, bool flag, std::string provenance,
                       std::string detail, double observed = 0.0, double tol = 0.0) {
  Expectation e;
  e.quantity = std::move(quantity);
  e.kind = "flag";
  e.observed = observed;
  e.target = 0.0;
  e.tol = tol;
  e.provenance = std::move(provenance);
  e.passed = flag;
  e.detail = std::move(detail);
  return e;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + io::format_double(v[i]);
  return "[" + s + "]";
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double spatial_sq(const Domain& q, const double* p) {
  double s = 0.0;
  for (std::size_t a = q.spatial_offset(); a < q.dim(); ++a) s += p[a] * p[a];
  return s;
}

// Profile with a logarithmic derivative singularity at 0, and its derivative.
double w1k_u(double x) {
  const double ax = std::abs(x);
  if (ax > std::exp(-1.0) || ax == 0.0) return 0.0;
  return 0.5 * x * std::log(1.0 / (std::numbers::e * ax));
}

double w1k_uprime(double x) {
  const double ax = std::max(std::abs(x), std::numeric_limits<double>::min());
  if (ax >= std::exp(-1.0)) return 0.0;
  return std::log(1.0 / (std::numbers::e * std::sqrt(ax)));
}

using Builder = std::function<Field(const Domain&)>;

struct Entry {
  FieldRecipe recipe;
  Builder build;
};

Field with_scalar_gradient(const Domain& q, std::function<double(const double*)> value,
                           std::function<double(const double*)> grad, const std::string& name) {
  const auto n = static_cast<int>(q.spatial_dim());
  Field g = Field::analytic(
      q, Arity{1, n},
      [grad, n](const double* p, double* out) {
        out[0] = grad(p);
        for (int c = 1; c < n; ++c) out[c] = 0.0;
      },
      name + "_gradient");
  return Field::scalar(q, std::move(value), name).with_gradient(g);
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    const Domain st = Domain::box(0.0, 1.0, 0.0, 1.0);
    const Domain unit = Domain::interval(0.0, 1.0);
    const Domain sym = Domain::interval(-1.0, 1.0);
    std::vector<Entry> e;
    e.push_back({{"zero", true, st, "b = 0"},
                 [](const Domain& q) { return Field::zero(q).renamed("zero"); }});
    e.push_back({{"tsin3x", true, st, "b(t, x) = t sin(3x)"}, [](const Domain& q) {
                   const std::size_t o = q.spatial_offset();
                   return with_scalar_gradient(
                       q, [o](const double* p) { return p[0] * std::sin(3.0 * p[o]); },
                       [o](const double* p) { return 3.0 * p[0] * std::cos(3.0 * p[o]); },
                       "tsin3x");
                 }});
    e.push_back({{"linear_x", true, st, "b(t, x) = x"}, [](const Domain& q) {
                   const std::size_t o = q.spatial_offset();
                   return with_scalar_gradient(
                       q, [o](const double* p) { return p[o]; },
                       [](const double*) { return 1.0; }, "linear_x");
                 }});
    e.push_back({{"kink", true, st, "b(t, x) = |x - 1/2|"}, [](const Domain& q) {
                   const std::size_t o = q.spatial_offset();
                   return with_scalar_gradient(
                       q, [o](const double* p) { return std::abs(p[o] - 0.5); },
                       [o](const double* p) { return sign(p[o] - 0.5); }, "kink");
                 }});
    e.push_back({{"sign_t_x", true, st, "b(t, x) = sign(t - 1/2) x"}, [](const Domain& q) {
                   const std::size_t o = q.spatial_offset();
                   return with_scalar_gradient(
                       q, [o](const double* p) { return sign(p[0] - 0.5) * p[o]; },
                       [](const double* p) { return sign(p[0] - 0.5); }, "sign_t_x");
                 }});
    e.push_back({{"example_ex_u", false, unit, "u(x) = log(x^{-1/2})"}, [](const Domain& q) {
                   return with_scalar_gradient(
                       q, [](const double* p) { return -0.5 * std::log(p[0]); },
                       [](const double* p) { return -0.5 / p[0]; }, "example_ex_u");
                 }});
    e.push_back({{"w1k_u", false, sym, "u(x) = (x/2) log(1/(e|x|)) for |x| <= 1/e"},
                 [](const Domain& q) {
                   return with_scalar_gradient(
                       q, [](const double* p) { return w1k_u(p[0]); },
                       [](const double* p) { return w1k_uprime(p[0]); }, "w1k_u");
                 }});
    e.push_back({{"w1k_uprime", false, sym, "u'(x) = log(1/(e sqrt|x|)) for |x| < 1/e"},
                 [](const Domain& q) {
                   return Field::scalar(q, [](const double* p) { return w1k_uprime(p[0]); },
                                        "w1k_uprime");
                 }});
    e.push_back({{"x_log_inv_x", false, unit, "u(x) = x log(1/x)"}, [](const Domain& q) {
                   return with_scalar_gradient(
                       q, [](const double* p) { return -p[0] * std::log(p[0]); },
                       [](const double* p) { return -std::log(p[0]) - 1.0; }, "x_log_inv_x");
                 }});
    e.push_back({{"linear", false, unit, "u(x) = x"}, [](const Domain& q) {
                   return with_scalar_gradient(
                       q, [](const double* p) { return p[0]; },
                       [](const double*) { return 1.0; }, "linear");
                 }});
    return e;
  }();
  return table;
}

const Entry& entry(const std::string& name) {
  for (const auto& e : entries()) {
    if (e.recipe.name == name) return e;
  }
  throw DomainError("unknown field recipe '" + name + "'");
}

}  // namespace

// ---------------------------------------------------------------------------

json Expectation::to_json() const {
  return {{"quantity", quantity}, {"kind", kind},         {"target", num(target)},
          {"tol", num(tol)},      {"observed", num(observed)}, {"provenance", provenance},
          {"passed", passed},     {"detail", detail}};
}

std::string Table::to_csv() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out << (i ? "," : "") << (std::isinf(row[i]) ? (row[i] > 0 ? "inf" : "-inf")
                                                    : io::format_double(row[i]));
    }
    out << '\n';
  }
  return out.str();
}

bool ScenarioResult::passed() const {
  return std::all_of(expectations.begin(), expectations.end(),
                     [](const Expectation& e) { return e.passed; });
}

json ScenarioResult::to_json() const {
  json ex = json::array();
  for (const auto& e : expectations) ex.push_back(e.to_json());
  json reps = json::object();
  for (const auto& [n, r] : reports) reps[n] = r.to_json();
  json tabs = json::array();
  for (const auto& t : tables) tabs.push_back(t.name);
  json docs = json::array();
  for (const auto& [n, d] : documents) docs.push_back(n);
  return {{"scenario", name},  {"passed", passed()}, {"config", config},
          {"expectations", ex}, {"reports", reps},   {"tables", tabs},
          {"documents", docs}};
}

void write_result(const ScenarioResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& file, const std::string& text) {
    std::ofstream out(dir / file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / file).string());
    out << text;
  };
  write("result.json", r.to_json().dump(2) + "\n");
  write("config.json", r.config.dump(2) + "\n");
  for (const auto& [n, rep] : r.reports) {
    write("report_" + n + ".csv", rep.to_csv());
    write("report_" + n + ".json", rep.to_json().dump(2) + "\n");
  }
  for (const auto& t : r.tables) write(t.name + ".csv", t.to_csv());
  for (const auto& [n, d] : r.documents) write(n + ".json", d.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Recipes

const std::vector<FieldRecipe>& field_recipes() {
  static const std::vector<FieldRecipe> out = [] {
    std::vector<FieldRecipe> v;
    for (const auto& e : entries()) v.push_back(e.recipe);
    return v;
  }();
  return out;
}

const FieldRecipe& field_recipe(const std::string& name) { return entry(name).recipe; }

Field make_field(const std::string& name, const Domain& q) {
  const auto& e = entry(name);
  const bool st = q.kind() == DomainKind::SpaceTimeBox;
  if (name != "zero" && st != e.recipe.space_time) {
    throw DomainError("field recipe '" + name + "' needs " +
                      (e.recipe.space_time ? "a space-time box" : "an interval"));
  }
  return e.build(q);
}

Field make_field(const std::string& name) { return make_field(name, field_recipe(name).domain); }

std::vector<std::string> weight_recipes() { return {"one", "one_plus_x2"}; }

Weight make_weight(const std::string& name, const Domain& q) {
  if (name == "one") return Weight(Field::constant(q, 1.0).renamed("one"), false);
  if (name == "one_plus_x2") {
    return Weight(Field::scalar(
                      q, [q](const double* p) { return 1.0 + spatial_sq(q, p); }, "one_plus_x2"),
                  false);
  }
  throw DomainError("unknown weight recipe '" + name + "'");
}

Field autonomous(const Field& u, double t_lo, double t_hi) {
  if (u.domain().kind() != DomainKind::Interval1D) throw DomainError("u must live on an interval");
  const Domain q = Domain::space_time(Axis{"t", t_lo, t_hi}, {u.domain().axis(0)});
  const Field du = finite_diff_gradient(u);
  Field g = Field::analytic(
      q, du.arity(), [du](const double* p, double* out) { du.eval(p + 1, out); },
      u.name() + "_autonomous_gradient");
  return Field::analytic(
             q, u.arity(), [u](const double* p, double* out) { u.eval(p + 1, out); },
             u.name() + "_autonomous")
      .with_gradient(g);
}

// ---------------------------------------------------------------------------
// Mean convergence without energy convergence

namespace {

double f_h(double x, double h) {
  const double l = std::log(h);
  return x < 1.0 / h ? 2.0 * std::sqrt(h) / l : 1.0 / (l * std::sqrt(x));
}

double closed_f_f_h(double h) { return 4.0 / std::log(h) + 1.0; }

double closed_f_h(double h) {
  const double l = std::log(h);
  const double r = std::sqrt(h);
  return 2.0 / (r * l) + (2.0 - 2.0 / r) / l;
}

double closed_log1p_f_h(double h) {
  const double l = std::log(h);
  const double a = 1.0 / l;
  // x = y^2 turns the tail into the integral of 2y log(1 + a/y).
  auto anti = [a](double y) {
    return (y * y - a * a) * std::log(y + a) + a * y - y * y * std::log(y);
  };
  return std::log1p(2.0 * std::sqrt(h) / l) / h + anti(1.0) - anti(1.0 / std::sqrt(h));
}

}  // namespace

ScenarioResult run_example_ex(const ExampleExOptions& o) {
  require_increasing(o.h_ladder, "h ladder");
  if (o.h_ladder.front() < 10.0) throw DomainError("h ladder entries must be >= 10");
  ScenarioResult r;
  r.name = "example_ex";
  const Domain d = Domain::interval(0.0, 1.0);
  const NFunction phi = NFunction::tilde_exp(0.0, find_tau0());
  auto spec = [&](std::vector<double> breaks) {
    QuadratureSpec q;
    q.cells = {o.cells};
    q.singular = {{0, 0.0}};
    for (double b : breaks) q.breakpoints.push_back({0, b});
    q.grading_depth = o.grading_depth;
    return q;
  };
  bool diverged = false;
  auto integral = [&](std::function<double(const double*)> fn, const QuadratureSpec& q) {
    const auto res = integrate(Field::scalar(d, std::move(fn)), q);
    diverged = diverged || res.diverged;
    return res.value;
  };
  auto mod = [&](const Field& u, const QuadratureSpec& q) {
    const auto res = modular(phi, u, q);
    diverged = diverged || res.diverged;
    return res.value;
  };

  const QuadratureSpec q0 = spec({});
  const double int_f = integral([](const double* p) { return 1.0 / std::sqrt(p[0]); }, q0);
  const double int_log_f = integral([](const double* p) { return -0.5 * std::log(p[0]); }, q0);
  const Field u = make_field("example_ex_u", d);
  const double n_u = mod(u, q0);

  Table table;
  table.name = "integrals";
  table.columns = {"h",          "int_f",        "int_log_f",        "int_f_h",
                   "int_log1p_f_h", "int_f_f_h",   "closed_f_f_h",     "closed_f_h",
                   "closed_log1p_f_h", "N_u",      "N_u_h",            "N_u_h_minus_u",
                   "energy_gap", "gap_identity"};
  std::vector<Field> us;
  std::vector<double> mean, gaps, err_ffh, err_fh, err_log1p, err_identity;
  for (double h : o.h_ladder) {
    const QuadratureSpec qh = spec({1.0 / h});
    const double ifh = integral([h](const double* p) { return f_h(p[0], h); }, qh);
    const double ilog =
        integral([h](const double* p) { return std::log1p(f_h(p[0], h)); }, qh);
    const double iffh =
        integral([h](const double* p) { return f_h(p[0], h) / std::sqrt(p[0]); }, qh);
    Field uh = Field::scalar(
        d, [h](const double* p) { return -0.5 * std::log(p[0]) + std::log1p(f_h(p[0], h)); },
        "u_h");
    Field diff = Field::scalar(d, [h](const double* p) { return std::log1p(f_h(p[0], h)); });
    const double n_uh = mod(uh, qh);
    const double n_diff = mod(diff, qh);
    const double gap = n_uh - n_u;
    const double identity = iffh - ilog;
    us.push_back(uh);
    mean.push_back(n_diff);
    gaps.push_back(gap);
    err_ffh.push_back(std::abs(iffh - closed_f_f_h(h)));
    err_fh.push_back(std::abs(ifh - closed_f_h(h)));
    err_log1p.push_back(std::abs(ilog - closed_log1p_f_h(h)));
    err_identity.push_back(std::abs(gap - identity));
    table.rows.push_back({h, int_f, int_log_f, ifh, ilog, iffh, closed_f_f_h(h), closed_f_h(h),
                          closed_log1p_f_h(h), n_u, n_uh, n_diff, gap, identity});
  }

  std::vector<double> all_breaks;
  for (double h : o.h_ladder) all_breaks.push_back(1.0 / h);
  std::sort(all_breaks.begin(), all_breaks.end());
  const std::vector<double> lambdas{1.0, 2.0};
  ConvergenceReport report =
      classify_sequence(phi, us, u, lambdas, spec(all_breaks), o.mean_tol, o.h_ladder);
  report.set_column("energy_gap_signed", gaps);
  report.set_column("closed_f_f_h", [&] {
    std::vector<double> v;
    for (double h : o.h_ladder) v.push_back(closed_f_f_h(h));
    return v;
  }());
  std::vector<double> dist_to_1;
  for (double g : gaps) dist_to_1.push_back(std::abs(g - 1.0));
  const bool toward_one =
      strictly_decreasing(dist_to_1) &&
      std::all_of(gaps.begin(), gaps.end(), [](double g) { return g > 1.0; });
  report.set_flag("energy_gap_toward_1", toward_one);
  report.set_note("phi", phi.to_string());

  auto maxv = [](const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); };
  r.expectations.push_back(flag_check("no quadrature divergence", !diverged, "integrability",
                                      diverged ? "an integral was flagged diverged" : "all finite"));
  r.expectations.push_back(value_check("int f", int_f, 2.0, o.integral_tol, "closed_form"));
  r.expectations.push_back(value_check("int log f", int_log_f, 0.5, o.integral_tol, "closed_form"));
  r.expectations.push_back(value_check("N(u)", n_u, 0.5, o.integral_tol, "closed_form"));
  r.expectations.push_back(bound_check("max_h |int f f_h - (4/log h + 1)|", maxv(err_ffh), 0.0,
                                       o.integral_tol, "closed_form"));
  r.expectations.push_back(bound_check("max_h |int f_h - antiderivative|", maxv(err_fh), 0.0,
                                       o.integral_tol, "antiderivative"));
  r.expectations.push_back(bound_check("max_h |int log(1+f_h) - antiderivative|",
                                       maxv(err_log1p), 0.0, o.integral_tol, "antiderivative"));
  r.expectations.push_back(bound_check("max_h |gap - (int f f_h - int log(1+f_h))|",
                                       maxv(err_identity), 0.0, o.identity_tol, "identity"));
  r.expectations.push_back(flag_check("N(u_h - u) strictly decreasing", strictly_decreasing(mean),
                                      "closed_form", "mean = " + join(mean), mean.back()));
  r.expectations.push_back(flag_check("mean flag", report.flag("mean"), "run_audit",
                                      "last mean " + io::format_double(mean.back()) + " < " +
                                          io::format_double(o.mean_tol),
                                      mean.back(), o.mean_tol));
  r.expectations.push_back(flag_check("energy gap > 1 with |gap - 1| strictly decreasing",
                                      toward_one, "closed_form", "gap = " + join(gaps),
                                      gaps.back()));
  r.reports.emplace_back("convergence", std::move(report));
  r.tables.push_back(std::move(table));
  return r;
}

// ---------------------------------------------------------------------------
// W^{1,1} profile with one finite and one infinite modular

ScenarioResult run_example_w1k(const ExampleW1kOptions& o) {
  ScenarioResult r;
  r.name = "example_w1k";
  const Domain d = Domain::interval(-1.0, 1.0);
  const NFunction phi = NFunction::tilde_exp(0.0, find_tau0());
  const double ie = std::exp(-1.0);
  auto spec = [&](int depth) {
    QuadratureSpec q;
    q.cells = {o.cells};
    q.singular = {{0, 0.0}};
    q.breakpoints = {{0, -ie}, {0, ie}};
    q.grading_depth = depth;
    return q;
  };
  const Field up = make_field("w1k_uprime", d);
  const Field up2 = Field::scalar(d, [](const double* p) { return 2.0 * w1k_uprime(p[0]); });

  Table table;
  table.name = "modulars";
  table.columns = {"grading_depth", "N_uprime", "N_uprime_diverged", "N_2uprime",
                   "N_2uprime_diverged", "exp_part"};
  std::vector<ModularValue> n1, n2;
  std::vector<double> exp_part;
  for (int depth : {o.grading_depth, 2 * o.grading_depth}) {
    const auto q = spec(depth);
    n1.push_back(modular(phi, up, q));
    n2.push_back(modular(phi, up2, q));
    QuadratureSpec qe;
    qe.cells = {o.cells};
    qe.singular = {{0, 0.0}};
    qe.grading_depth = depth;
    exp_part.push_back(integrate(Field::scalar(Domain::interval(-ie, ie),
                                               [](const double* p) {
                                                 return std::exp(w1k_uprime(p[0]));
                                               }),
                                 qe)
                           .value);
    table.rows.push_back({static_cast<double>(depth), n1.back().value,
                          n1.back().diverged ? 1.0 : 0.0, n2.back().value,
                          n2.back().diverged ? 1.0 : 0.0, exp_part.back()});
  }

  double reduction = 0.0;
  for (double x : {1e-3, -1e-3, 1e-6, -1e-6, 1e-9, -1e-9}) {
    const double v = std::exp(2.0 * std::abs(w1k_uprime(x))) * std::exp(2.0) * std::abs(x);
    reduction = std::max(reduction, std::abs(v - 1.0));
  }
  double fd = 0.0;
  for (double x : {0.05, -0.05, 0.2, -0.2}) {
    const double h = o.fd_step;
    const double diff = (w1k_u(x + h) - w1k_u(x - h)) / (2.0 * h);
    fd = std::max(fd, std::abs(diff - w1k_uprime(x)));
  }

  const double target = 4.0 * std::exp(-1.5);
  r.expectations.push_back(flag_check("N(|u'|) finite at both grading depths",
                                      n1[0].finite() && n1[1].finite(), "antiderivative",
                                      "N = " + io::format_double(n1[0].value) + ", " +
                                          io::format_double(n1[1].value),
                                      n1[0].value));
  r.expectations.push_back(value_check("N(|u'|) stable under doubled grading", n1[1].value,
                                       n1[0].value, o.exp_part_tol, "run_audit"));
  r.expectations.push_back(value_check("int_{|x|<1/e} exp(u')", exp_part[0], target,
                                       o.exp_part_tol, "antiderivative"));
  r.expectations.push_back(value_check("int_{|x|<1/e} exp(u') at doubled grading", exp_part[1],
                                       target, o.exp_part_tol, "antiderivative"));
  r.expectations.push_back(flag_check("N(2|u'|) diverged at both grading depths",
                                      n2[0].diverged && n2[1].diverged, "analytic_reduction",
                                      "divergence flags " + std::to_string(n2[0].diverged) +
                                          ", " + std::to_string(n2[1].diverged)));
  r.expectations.push_back(bound_check("max |exp(2|u'|) e^2 |x| - 1|", reduction, 0.0, 1e-9,
                                       "analytic_reduction"));
  r.expectations.push_back(bound_check("max |u' - central difference of u|", fd, 0.0, o.fd_tol,
                                       "finite_difference"));
  r.tables.push_back(std::move(table));
  return r;
}

// ---------------------------------------------------------------------------
// Smoothing energy convergence

ScenarioResult run_smoothing_energy(const SmoothingEnergyOptions& o) {
  require_decreasing(o.deltas, "delta ladder");
  if (o.weights.empty()) throw DomainError("weight list is empty");
  ScenarioResult r;
  r.name = "smoothing_energy";
  const Field b = make_field(o.b);
  const NFunction phi = NFunction::parse(o.phi);
  const auto k = phi.known_subadditivity_constant();
  for (std::size_t wi = 0; wi < o.weights.size(); ++wi) {
    const auto& wname = o.weights[wi];
    const Weight w = make_weight(wname, b.domain());
    auto ec = verify_energy_convergence(b, phi, w, o.deltas, o.smoothing, o.rel_tol);
    const auto& db_l1 = ec.report.column("db_l1");
    const auto& z_sup = ec.report.column("z_sup");
    double db_ratio = 0.0;
    double z_ratio = 0.0;
    for (std::size_t i = 0; i < o.deltas.size(); ++i) {
      db_ratio = std::max(db_ratio, db_l1[i] / o.deltas[i]);
      z_ratio = std::max(z_ratio, z_sup[i] / (0.5 * o.deltas[i]));
    }
    const std::string tag = "w=" + wname;
    r.expectations.push_back(bound_check(tag + ": max |Db_delta - Db|_L1 / delta", db_ratio, 1.0,
                                         0.0, "construction"));
    Expectation ez = bound_check(tag + ": max sup|z_delta| / (delta/2)", z_ratio, 1.0, 0.0,
                                 "construction");
    ez.passed = z_ratio < 1.0;
    r.expectations.push_back(ez);
    const auto& gap = ec.report.column("energy_gap");
    r.expectations.push_back(flag_check(
        tag + ": energy gap decreasing, final <= rel_tol N(|Db|)", ec.report.flag("energy"),
        "run_audit", "gap = " + join(gap), gap.back(), o.rel_tol * ec.reference_energy));
    if (k) {
      bool dom = true;
      std::string detail;
      for (const auto& snap : ec.snapshots) {
        const auto rep = check_domination(snap, phi, *k);
        dom = dom && rep.passed;
        detail = rep.detail;
      }
      r.expectations.push_back(flag_check(tag + ": pointwise domination", dom, "inequality",
                                          detail));
    }
    if (wi == 0) {
      const auto jr = check_jensen_step(b, ec.plans.back(), phi, o.jensen_points, o.seed);
      r.expectations.push_back(bound_check("Jensen step phi(|v_delta|) - G_delta", jr.max_excess,
                                           0.0, 1e-10, "inequality"));
    }
    for (std::size_t i = 0; i < ec.plans.size(); ++i) {
      r.documents.emplace_back("plan_" + wname + "_" + std::to_string(i), ec.plans[i].to_json());
    }
    r.reports.emplace_back("energy_" + wname, std::move(ec.report));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Time mollification

ScenarioResult run_time_mollification(const TimeMollificationOptions& o) {
  if (o.eps.empty()) throw DomainError("eps ladder is empty");
  ScenarioResult r;
  r.name = "time_mollification";
  const Field b = make_field(o.b);
  const NFunction phi = NFunction::parse(o.phi);
  const Weight w = make_weight(o.weight, b.domain());
  if (w.time_dependent()) throw DomainError("the weight must not depend on time");
  QuadratureSpec q;
  q.cells = {o.cells};
  q.breakpoints = {{0, 0.5 * (b.domain().axis(0).lo + b.domain().axis(0).hi)}};
  const auto ref = weighted_energy(phi, w, finite_diff_gradient(b), q);
  std::vector<double> energies;
  double worst = -kInf;
  for (double eps : o.eps) {
    const Field be = time_mollify(b, eps);
    const auto e = weighted_energy(phi, w, finite_diff_gradient(be), q);
    energies.push_back(e.value);
    worst = std::max(worst, e.value - ref.value);
  }
  ConvergenceReport report("eps", o.eps, o.slack);
  report.set_column("energy_time_mollified", energies);
  report.set_column("energy_reference", std::vector<double>(o.eps.size(), ref.value));
  report.set_flag("contraction", worst <= o.slack);
  report.set_note("phi", phi.to_string());
  report.set_note("b", o.b);
  report.set_note("weight", o.weight);
  r.expectations.push_back(bound_check("max_eps N(|Db^eps|) - N(|Db|)", worst, 0.0, o.slack,
                                       "jensen"));
  if (o.b == "sign_t_x" && o.weight == "one") {
    // |Db| = 1 off the jump.
    r.expectations.push_back(value_check("N(|Db|) = phi(1) |Q|", ref.value,
                                         phi(1.0) * b.domain().volume(), 1e-12, "closed_form"));
  }
  r.reports.emplace_back("contraction", std::move(report));
  return r;
}

// ---------------------------------------------------------------------------
// Energy convergence to modular convergence

ScenarioResult run_energy_to_modular(const EnergyToModularOptions& o) {
  const NFunction phi = NFunction::parse(o.phi);
  if (!phi.strictly_convex()) {
    throw DomainError("phi '" + phi.to_string() + "' is not flagged strictly convex");
  }
  if (!(o.lambda > 0.0)) throw DomainError("lambda must be positive");
  ScenarioResult r;
  r.name = "energy_to_modular";
  const Field b = make_field(o.b);
  const Weight w = make_weight(o.weight, b.domain());
  const std::string mtag = "N(|Db_h - Db| / " + io::format_double(o.lambda) + ")";
  if (o.mode == "smoothing") {
    require_decreasing(o.deltas, "delta ladder");
    auto ec = verify_energy_convergence(b, phi, w, o.deltas, o.smoothing, 1e-2);
    std::vector<double> mod;
    for (const auto& s : ec.snapshots) mod.push_back(s.gradient_modular(phi, o.lambda));
    ec.report.set_column("gradient_modular", mod);
    const bool flag = decreasing_below(mod, o.tol);
    ec.report.set_flag("modular", flag);
    r.expectations.push_back(flag_check("energy convergence along the ladder",
                                        ec.report.flag("energy"), "run_audit",
                                        "gap = " + join(ec.report.column("energy_gap"))));
    r.expectations.push_back(flag_check(mtag + " decreasing below tol", flag, "run_audit",
                                        "modular = " + join(mod), mod.back(), o.tol));
    for (std::size_t i = 0; i < ec.plans.size(); ++i) {
      r.documents.emplace_back("plan_" + std::to_string(i), ec.plans[i].to_json());
    }
    r.reports.emplace_back("modular", std::move(ec.report));
    return r;
  }
  if (o.mode != "identity" && o.mode != "linear") {
    throw DomainError("unknown mode '" + o.mode + "' (smoothing, identity, linear)");
  }
  require_increasing(o.h_ladder, "h ladder");
  const Domain& q = b.domain();
  QuadratureSpec spec;
  spec.cells = {o.cells};
  const QuadratureRule rule(q, spec);
  std::vector<double> mod, closed;
  for (double h : o.h_ladder) {
    // D(b + x/h) - Db = (1/h) e_x, so only the shift enters.
    const double shift = o.mode == "linear" ? 1.0 / h : 0.0;
    const auto res = rule.integrate([&](const double* p) { return w(p) * phi(shift / o.lambda); });
    mod.push_back(res.value);
    closed.push_back(q.volume() * phi(shift / o.lambda));
  }
  ConvergenceReport report("h", o.h_ladder, o.tol);
  report.set_column("gradient_modular", mod);
  const bool trend = o.mode == "identity"
                         ? std::all_of(mod.begin(), mod.end(), [](double v) { return v == 0.0; })
                         : decreasing_below(mod, o.tol);
  report.set_flag("modular", trend);
  r.expectations.push_back(flag_check(mtag + " trend", trend, "closed_form",
                                      "modular = " + join(mod), mod.back(), o.tol));
  if (o.mode == "linear" && o.weight == "one") {
    report.set_column("closed_form", closed);
    double err = 0.0;
    for (std::size_t i = 0; i < mod.size(); ++i) {
      err = std::max(err, std::abs(mod[i] - closed[i]) / closed[i]);
    }
    r.expectations.push_back(bound_check("relative error vs |Q| phi(1/(lambda h))", err, 0.0,
                                         1e-12, "closed_form"));
  }
  r.reports.emplace_back("modular", std::move(report));
  return r;
}

// ---------------------------------------------------------------------------
// Autonomous Orlicz-Sobolev demo

ScenarioResult run_orlicz_sobolev_demo(const OrliczSobolevOptions& o) {
  require_decreasing(o.deltas, "delta ladder");
  const auto& rec = field_recipe(o.u);
  if (rec.space_time) throw DomainError("u must be an interval recipe");
  ScenarioResult r;
  r.name = "orlicz_sobolev_demo";
  const double tau = o.tau > 0.0 ? o.tau : find_tau0();
  const NFunction phi = NFunction::tilde_exp(o.gamma, tau);
  const Field b = autonomous(make_field(o.u));
  const Weight w = make_weight("one", b.domain());
  auto ec = verify_energy_convergence(b, phi, w, o.deltas, o.smoothing, o.rel_tol);
  std::vector<double> mean, norm;
  for (const auto& s : ec.snapshots) {
    mean.push_back(s.value_modular(phi));
    norm.push_back(s.value_norm(phi));
  }
  ec.report.set_column("mean", mean);
  ec.report.set_column("norm", norm);
  const bool mean_flag = decreasing_below(mean, o.rel_tol) ||
                         std::all_of(mean.begin(), mean.end(), [&](double v) {
                           return v <= o.rel_tol * 1e-6;
                         });
  const bool energy_flag = ec.report.flag("energy");
  ec.report.set_flag("mean", mean_flag);
  ec.report.set_flag("norm_recorded", decreasing_below(norm, o.rel_tol));
  ec.report.set_note("norm", "recorded only");
  ec.report.set_note("u", o.u);
  r.expectations.push_back(flag_check("mean N(u_h - u) decreasing below tol", mean_flag,
                                      "run_audit", "mean = " + join(mean), mean.back(),
                                      o.rel_tol));
  r.expectations.push_back(flag_check("energy gap decreasing below rel_tol N(|Du|)", energy_flag,
                                      "run_audit",
                                      "gap = " + join(ec.report.column("energy_gap")),
                                      ec.report.column("energy_gap").back(),
                                      o.rel_tol * ec.reference_energy));
  for (std::size_t i = 0; i < ec.plans.size(); ++i) {
    r.documents.emplace_back("plan_" + std::to_string(i), ec.plans[i].to_json());
  }
  r.reports.emplace_back("convergence", std::move(ec.report));
  return r;
}

// ---------------------------------------------------------------------------
// Registry

json to_json(const SmoothingOptions& o) {
  return {{"j_max", o.j_max},
          {"fraction", o.fraction},
          {"kernel_cells", o.kernel_cells},
          {"cells_per_ramp", o.cells_per_ramp},
          {"h_max", o.h_max},
          {"predict_stride", o.predict_stride},
          {"audit_refine", o.audit_refine},
          {"floor_factor", o.floor_factor}};
}

SmoothingOptions smoothing_options_from_json(const json& j, SmoothingOptions o) {
  reject_unknown(j, to_json(o), "smoothing");
  take(j, "j_max", o.j_max);
  take(j, "fraction", o.fraction);
  take(j, "kernel_cells", o.kernel_cells);
  take(j, "cells_per_ramp", o.cells_per_ramp);
  take(j, "h_max", o.h_max);
  take(j, "predict_stride", o.predict_stride);
  take(j, "audit_refine", o.audit_refine);
  take(j, "floor_factor", o.floor_factor);
  return o;
}

namespace {

json config_of(const ExampleExOptions& o) {
  return {{"h_ladder", o.h_ladder},         {"cells", o.cells},
          {"grading_depth", o.grading_depth}, {"integral_tol", o.integral_tol},
          {"identity_tol", o.identity_tol}, {"mean_tol", o.mean_tol}};
}
ExampleExOptions parse_ex(const json& j) {
  ExampleExOptions o;
  reject_unknown(j, config_of(o), "example_ex");
  take(j, "h_ladder", o.h_ladder);
  take(j, "cells", o.cells);
  take(j, "grading_depth", o.grading_depth);
  take(j, "integral_tol", o.integral_tol);
  take(j, "identity_tol", o.identity_tol);
  take(j, "mean_tol", o.mean_tol);
  return o;
}

json config_of(const ExampleW1kOptions& o) {
  return {{"cells", o.cells},       {"grading_depth", o.grading_depth},
          {"exp_part_tol", o.exp_part_tol}, {"fd_step", o.fd_step},
          {"fd_tol", o.fd_tol}};
}
ExampleW1kOptions parse_w1k(const json& j) {
  ExampleW1kOptions o;
  reject_unknown(j, config_of(o), "example_w1k");
  take(j, "cells", o.cells);
  take(j, "grading_depth", o.grading_depth);
  take(j, "exp_part_tol", o.exp_part_tol);
  take(j, "fd_step", o.fd_step);
  take(j, "fd_tol", o.fd_tol);
  return o;
}

json config_of(const SmoothingEnergyOptions& o) {
  return {{"b", o.b},
          {"phi", o.phi},
          {"weights", o.weights},
          {"deltas", o.deltas},
          {"rel_tol", o.rel_tol},
          {"jensen_points", o.jensen_points},
          {"seed", o.seed},
          {"smoothing", to_json(o.smoothing)}};
}
SmoothingEnergyOptions parse_smoothing(const json& j) {
  SmoothingEnergyOptions o;
  reject_unknown(j, config_of(o), "smoothing_energy");
  take(j, "b", o.b);
  take(j, "phi", o.phi);
  take(j, "weights", o.weights);
  take(j, "deltas", o.deltas);
  take(j, "rel_tol", o.rel_tol);
  take(j, "jensen_points", o.jensen_points);
  take(j, "seed", o.seed);
  if (j.contains("smoothing")) o.smoothing = smoothing_options_from_json(j.at("smoothing"));
  return o;
}

json config_of(const TimeMollificationOptions& o) {
  return {{"b", o.b},     {"phi", o.phi},     {"weight", o.weight},
          {"eps", o.eps}, {"cells", o.cells}, {"slack", o.slack}};
}
TimeMollificationOptions parse_time(const json& j) {
  TimeMollificationOptions o;
  reject_unknown(j, config_of(o), "time_mollification");
  take(j, "b", o.b);
  take(j, "phi", o.phi);
  take(j, "weight", o.weight);
  take(j, "eps", o.eps);
  take(j, "cells", o.cells);
  take(j, "slack", o.slack);
  return o;
}

json config_of(const EnergyToModularOptions& o) {
  return {{"mode", o.mode},         {"b", o.b},           {"phi", o.phi},
          {"weight", o.weight},     {"deltas", o.deltas}, {"h_ladder", o.h_ladder},
          {"tol", o.tol},           {"lambda", o.lambda}, {"cells", o.cells},
          {"smoothing", to_json(o.smoothing)}};
}
EnergyToModularOptions parse_e2m(const json& j) {
  EnergyToModularOptions o;
  reject_unknown(j, config_of(o), "energy_to_modular");
  take(j, "mode", o.mode);
  take(j, "b", o.b);
  take(j, "phi", o.phi);
  take(j, "weight", o.weight);
  take(j, "deltas", o.deltas);
  take(j, "h_ladder", o.h_ladder);
  take(j, "tol", o.tol);
  take(j, "lambda", o.lambda);
  take(j, "cells", o.cells);
  if (j.contains("smoothing")) o.smoothing = smoothing_options_from_json(j.at("smoothing"));
  return o;
}

json config_of(const OrliczSobolevOptions& o) {
  return {{"u", o.u},           {"gamma", o.gamma},     {"tau", o.tau},
          {"deltas", o.deltas}, {"rel_tol", o.rel_tol}, {"smoothing", to_json(o.smoothing)}};
}
OrliczSobolevOptions parse_os(const json& j) {
  OrliczSobolevOptions o;
  reject_unknown(j, config_of(o), "orlicz_sobolev_demo");
  take(j, "u", o.u);
  take(j, "gamma", o.gamma);
  take(j, "tau", o.tau);
  take(j, "deltas", o.deltas);
  take(j, "rel_tol", o.rel_tol);
  if (j.contains("smoothing")) o.smoothing = smoothing_options_from_json(j.at("smoothing"));
  return o;
}

}  // namespace

std::vector<ScenarioInfo> list() {
  return {
      {"example_ex", "mean convergence without energy convergence on (0,1)"},
      {"example_w1k", "one finite and one diverged modular for u' on (-1,1)"},
      {"smoothing_energy", "smoothing plans for t sin(3x) with energy convergence"},
      {"time_mollification", "energy contraction under time mollification"},
      {"energy_to_modular", "energy convergence plus strict convexity gives modular convergence"},
      {"orlicz_sobolev_demo", "autonomous smoothing of a one-dimensional u"},
  };
}

json default_config(const std::string& name) {
  if (name == "example_ex") return config_of(ExampleExOptions{});
  if (name == "example_w1k") return config_of(ExampleW1kOptions{});
  if (name == "smoothing_energy") return config_of(SmoothingEnergyOptions{});
  if (name == "time_mollification") return config_of(TimeMollificationOptions{});
  if (name == "energy_to_modular") return config_of(EnergyToModularOptions{});
  if (name == "orlicz_sobolev_demo") return config_of(OrliczSobolevOptions{});
  throw DomainError("unknown scenario '" + name + "'");
}

ScenarioResult run(const std::string& name, const json& config) {
  const json& c = config.is_null() ? json::object() : config;
  ScenarioResult r;
  if (name == "example_ex") {
    const auto o = parse_ex(c);
    r = run_example_ex(o);
    r.config = config_of(o);
  } else if (name == "example_w1k") {
    const auto o = parse_w1k(c);
    r = run_example_w1k(o);
    r.config = config_of(o);
  } else if (name == "smoothing_energy") {
    const auto o = parse_smoothing(c);
    r = run_smoothing_energy(o);
    r.config = config_of(o);
  } else if (name == "time_mollification") {
    const auto o = parse_time(c);
    r = run_time_mollification(o);
    r.config = config_of(o);
  } else if (name == "energy_to_modular") {
    const auto o = parse_e2m(c);
    r = run_energy_to_modular(o);
    r.config = config_of(o);
  } else if (name == "orlicz_sobolev_demo") {
    const auto o = parse_os(c);
    r = run_orlicz_sobolev_demo(o);
    r.config = config_of(o);
  } else {
    throw DomainError("unknown scenario '" + name + "'");
  }
  return r;
}

}  // namespace orlicz::scenarios
