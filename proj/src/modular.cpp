#include "orlicz/modular.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "orlicz/io.hpp"
#include "orlicz/numerics.hpp"

namespace orlicz {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> node_magnitudes(const Field& u, const QuadratureRule& rule) {
  std::vector<double> mags(rule.size());
  numerics::parallel_for(rule.size(), [&](std::size_t i) { mags[i] = u.norm(rule.point(i)); });
  return mags;
}

ModularValue to_modular(const QuadResult& r, const QuadratureSpec& q) {
  ModularValue m;
  m.value = r.diverged ? kInf : r.value;
  m.diverged = r.diverged;
  m.spec = q;
  m.evaluations = r.evaluations;
  return m;
}

ModularValue diverged_value(const QuadratureRule& rule) {
  ModularValue m;
  m.value = kInf;
  m.diverged = true;
  m.spec = rule.spec();
  m.evaluations = rule.size();
  return m;
}

}  // namespace

QuadratureRule rule_for(const Field& u, const QuadratureSpec& q) {
  if (u.is_sampled() && q.singular.empty() && q.breakpoints.empty()) {
    QuadratureSpec own = q;
    own.cells = u.grid().cells;
    own.grading_depth = 0;
    return QuadratureRule(u.domain(), own);
  }
  return QuadratureRule(u.domain(), q);
}

ModularValue modular(const NFunction& phi, const Field& u, const QuadratureSpec& q) {
  return DiscreteModular(u, q).at(phi);
}

ModularValue weighted_energy(const NFunction& phi, const Weight& w, const Field& Db,
                             const QuadratureSpec& q) {
  if (!(w.field().domain() == Db.domain())) {
    throw DomainError("weight and gradient live on different domains");
  }
  const QuadratureRule rule = rule_for(Db, q);
  std::vector<double> values(rule.size());
  try {
    numerics::parallel_for(rule.size(), [&](std::size_t i) {
      const double* p = rule.point(i);
      values[i] = w(p) * phi(Db.norm(p));
    });
  } catch (const SaturationError&) {
    return diverged_value(rule);
  }
  return to_modular(rule.reduce(values), rule.spec());
}

DiscreteModular::DiscreteModular(const Field& u, const QuadratureSpec& q)
    : rule_(rule_for(u, q)) {
  mags_ = node_magnitudes(u, rule_);
}

DiscreteModular::DiscreteModular(QuadratureRule rule, std::vector<double> magnitudes)
    : rule_(std::move(rule)), mags_(std::move(magnitudes)) {
  if (mags_.size() != rule_.size()) throw std::invalid_argument("magnitude count mismatch");
}

ModularValue DiscreteModular::at(const NFunction& phi, double lambda) const {
  if (!(lambda > 0.0)) throw DomainError("modular scale must be positive");
  std::vector<double> values(mags_.size());
  try {
    for (std::size_t i = 0; i < mags_.size(); ++i) values[i] = phi(mags_[i] / lambda);
  } catch (const SaturationError&) {
    return diverged_value(rule_);
  }
  return to_modular(rule_.reduce(values), rule_.spec());
}

double DiscreteModular::luxemburg(const NFunction& phi, double tol) const {
  if (!(tol > 0.0)) throw DomainError("tolerance must be positive");
  if (std::all_of(mags_.begin(), mags_.end(), [](double m) { return m == 0.0; })) {
    return 0.0;
  }
  auto within = [&](double lambda) {
    const auto m = at(phi, lambda);
    return m.finite() && m.value <= 1.0;
  };
  constexpr int kCap = 60;
  double lo = 1.0;
  double hi = 1.0;
  if (within(1.0)) {
    int k = 0;
    while (within(lo) && k < kCap) {
      hi = lo;
      lo *= 0.5;
      ++k;
    }
    if (within(lo)) return lo;
  } else {
    int k = 0;
    while (!within(hi) && k < kCap) {
      lo = hi;
      hi *= 2.0;
      ++k;
    }
    if (!within(hi)) {
      throw BracketFailure("N(u/lambda) > 1 for every lambda up to 2^60");
    }
  }
  // N(u/lambda) is nonincreasing in lambda, so 1[within] is a step function.
  return numerics::bisect_increasing(
      [&](double lambda) { return within(lambda) ? 1.0 : -1.0; }, lo, hi, tol * lo);
}

double luxemburg_norm(const NFunction& phi, const Field& u, const QuadratureSpec& q,
                      double tol) {
  return DiscreteModular(u, q).luxemburg(phi, tol);
}

// ---------------------------------------------------------------------------
// ConvergenceReport

ConvergenceReport::ConvergenceReport(std::string index_name, std::vector<double> index,
                                     double tol)
    : index_name_(std::move(index_name)), index_(std::move(index)), tol_(tol) {}

void ConvergenceReport::set_column(const std::string& name, std::vector<double> values) {
  if (values.size() != index_.size()) {
    throw std::invalid_argument("column '" + name + "' does not match the ladder length");
  }
  for (auto& [key, col] : columns_) {
    if (key == name) {
      col = std::move(values);
      return;
    }
  }
  columns_.emplace_back(name, std::move(values));
}

const std::vector<double>& ConvergenceReport::column(const std::string& name) const {
  for (const auto& [key, col] : columns_) {
    if (key == name) return col;
  }
  throw std::out_of_range("no column '" + name + "'");
}

bool ConvergenceReport::has_column(const std::string& name) const {
  return std::any_of(columns_.begin(), columns_.end(),
                     [&](const auto& c) { return c.first == name; });
}

void ConvergenceReport::set_flag(const std::string& name, bool value) {
  for (auto& [key, v] : flags_) {
    if (key == name) {
      v = value;
      return;
    }
  }
  flags_.emplace_back(name, value);
}

bool ConvergenceReport::flag(const std::string& name) const {
  for (const auto& [key, v] : flags_) {
    if (key == name) return v;
  }
  throw std::out_of_range("no flag '" + name + "'");
}

void ConvergenceReport::set_note(const std::string& key, nlohmann::json value) {
  notes_[key] = std::move(value);
}

namespace {

nlohmann::json number_or_string(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

}  // namespace

nlohmann::json ConvergenceReport::to_json() const {
  nlohmann::json j;
  j["index_name"] = index_name_;
  j["index"] = index_;
  j["tolerance"] = tol_;
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& [name, values] : columns_) {
    nlohmann::json arr = nlohmann::json::array();
    for (double v : values) arr.push_back(number_or_string(v));
    cols.push_back({{"name", name}, {"values", arr}});
  }
  j["columns"] = cols;
  nlohmann::json flags = nlohmann::json::array();
  for (const auto& [name, v] : flags_) flags.push_back({{"name", name}, {"value", v}});
  j["flags"] = flags;
  j["notes"] = notes_;
  return j;
}

std::string ConvergenceReport::to_csv() const {
  std::ostringstream out;
  out << index_name_;
  for (const auto& c : columns_) out << ',' << c.first;
  out << '\n';
  for (std::size_t i = 0; i < index_.size(); ++i) {
    out << io::format_double(index_[i]);
    for (const auto& c : columns_) out << ',' << io::format_double(c.second[i]);
    out << '\n';
  }
  return out.str();
}

bool decreasing_below(std::span<const double> values, double tol) {
  if (values.empty()) return false;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) return false;
    if (i > 0 && values[i] > values[i - 1] + 1e-12 * std::abs(values[i - 1])) return false;
  }
  return values.back() < tol;
}

ConvergenceReport classify_sequence(const NFunction& phi, std::span<const Field> us,
                                    const Field& u, std::span<const double> lambdas,
                                    const QuadratureSpec& q, double tol,
                                    std::span<const double> h_ladder, double norm_tol) {
  if (us.empty()) throw std::invalid_argument("sequence is empty");
  if (lambdas.empty()) throw std::invalid_argument("lambda ladder is empty");
  if (!(tol > 0.0)) throw DomainError("tolerance must be positive");
  std::vector<double> index(h_ladder.begin(), h_ladder.end());
  if (index.empty()) {
    for (std::size_t i = 0; i < us.size(); ++i) index.push_back(static_cast<double>(i + 1));
  }
  if (index.size() != us.size()) throw std::invalid_argument("ladder length mismatch");
  for (std::size_t i = 1; i < index.size(); ++i) {
    if (!(index[i] > index[i - 1])) throw std::invalid_argument("ladder must increase");
  }
  for (const auto& uh : us) {
    if (!(uh.domain() == u.domain()) || !(uh.arity() == u.arity())) {
      throw DomainError("sequence fields must share the limit's domain and arity");
    }
  }
  std::vector<double> sorted(lambdas.begin(), lambdas.end());
  std::sort(sorted.begin(), sorted.end());

  const QuadratureRule rule = rule_for(u, q);
  const std::size_t n = rule.size();
  const std::size_t comps = u.arity().size();
  std::vector<double> base(n * comps);
  numerics::parallel_for(n, [&](std::size_t i) { u.eval(rule.point(i), &base[i * comps]); });
  std::vector<double> base_mag(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < comps; ++k) s += base[i * comps + k] * base[i * comps + k];
    base_mag[i] = std::sqrt(s);
  }
  const auto n_u = DiscreteModular(rule, base_mag).at(phi);

  ConvergenceReport report("h", index, tol);
  std::vector<double> mean, gap, norm, n_uh;
  std::vector<std::vector<double>> scaled(sorted.size());
  for (const auto& uh : us) {
    std::vector<double> vals(n * comps);
    numerics::parallel_for(n, [&](std::size_t i) { uh.eval(rule.point(i), &vals[i * comps]); });
    std::vector<double> diff(n), mag(n);
    for (std::size_t i = 0; i < n; ++i) {
      double sd = 0.0;
      double sm = 0.0;
      for (std::size_t k = 0; k < comps; ++k) {
        const double v = vals[i * comps + k];
        const double d = v - base[i * comps + k];
        sd += d * d;
        sm += v * v;
      }
      diff[i] = std::sqrt(sd);
      mag[i] = std::sqrt(sm);
    }
    const DiscreteModular dm(rule, diff);
    mean.push_back(dm.at(phi).value);
    for (std::size_t l = 0; l < sorted.size(); ++l) scaled[l].push_back(dm.at(phi, sorted[l]).value);
    const auto m_uh = DiscreteModular(rule, mag).at(phi);
    n_uh.push_back(m_uh.value);
    gap.push_back(m_uh.finite() && n_u.finite() ? std::abs(m_uh.value - n_u.value) : kInf);
    double nv = kInf;
    try {
      nv = dm.luxemburg(phi, norm_tol);
    } catch (const BracketFailure&) {
    }
    norm.push_back(nv);
  }

  report.set_column("mean", mean);
  for (std::size_t l = 0; l < sorted.size(); ++l) {
    report.set_column("modular_lambda=" + io::format_double(sorted[l]), scaled[l]);
  }
  report.set_column("energy_gap", gap);
  report.set_column("norm", norm);
  report.set_column("modular_uh", n_uh);

  const bool norm_flag = decreasing_below(norm, tol);
  bool dominated = norm_flag;
  for (std::size_t i = 0; i < mean.size() && dominated; ++i) {
    // N(v) <= |v| whenever |v| <= 1.
    dominated = norm[i] <= 1.0 && mean[i] <= norm[i] * (1.0 + 1e-9);
  }
  const bool mean_flag = decreasing_below(mean, tol) || dominated;
  std::optional<double> passing;
  for (std::size_t l = 0; l < sorted.size(); ++l) {
    if (decreasing_below(scaled[l], tol)) {
      passing = sorted[l];
      break;
    }
  }
  report.set_flag("norm", norm_flag);
  report.set_flag("mean", mean_flag);
  report.set_flag("modular", passing.has_value());
  report.set_flag("energy", decreasing_below(gap, tol));
  report.set_note("modular_lambda", passing ? nlohmann::json(*passing) : nlohmann::json());
  report.set_note("modular_u", number_or_string(n_u.value));
  report.set_note("phi", phi.to_string());
  return report;
}

VerificationReport check_convexity_split(const NFunction& phi, const Field& f,
                                         const Field& g, const QuadratureSpec& q) {
  if (!f.arity().scalar() || !g.arity().scalar() || !(f.domain() == g.domain())) {
    throw DomainError("convexity split needs scalar fields on a common domain");
  }
  const QuadratureRule rule = rule_for(f, q);
  const std::size_t n = rule.size();
  std::vector<double> fv(n), gv(n), sum(n);
  numerics::parallel_for(n, [&](std::size_t i) {
    fv[i] = std::abs(f.value(rule.point(i)));
    gv[i] = std::abs(g.value(rule.point(i)));
  });
  for (std::size_t i = 0; i < n; ++i) {
    sum[i] = std::abs(f.value(rule.point(i)) + g.value(rule.point(i)));
  }
  const auto lhs = DiscreteModular(rule, sum).at(phi.scaled(2.0));
  const auto nf = DiscreteModular(rule, fv).at(phi);
  const auto ng = DiscreteModular(rule, gv).at(phi);
  VerificationReport r;
  r.name = "convexity_split";
  r.samples = n;
  std::ostringstream detail;
  if (!nf.finite() || !ng.finite()) {
    r.passed = true;
    r.max_excess = lhs.finite() ? -kInf : 0.0;
    detail << "right-hand side diverged";
  } else if (!lhs.finite()) {
    r.passed = false;
    r.violations = 1;
    r.max_excess = kInf;
    detail << "left-hand side diverged";
  } else {
    const double rhs = 0.5 * (nf.value + ng.value);
    r.max_excess = lhs.value - rhs;
    r.worst = {lhs.value, rhs};
    r.passed = r.max_excess <= 1e-12 * (1.0 + std::abs(rhs));
    r.violations = r.passed ? 0 : 1;
    detail << "lhs " << io::format_double(lhs.value) << " rhs " << io::format_double(rhs);
  }
  r.detail = detail.str();
  return r;
}

std::vector<std::pair<double, bool>> finite_at_scales(const NFunction& phi,
                                                      const Field& u,
                                                      std::span<const double> lambdas,
                                                      const QuadratureSpec& q) {
  const DiscreteModular dm(u, q);
  std::vector<std::pair<double, bool>> out;
  for (double l : lambdas) out.emplace_back(l, dm.at(phi, l).finite());
  return out;
}

}  // namespace orlicz
