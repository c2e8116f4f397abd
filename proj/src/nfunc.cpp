#include "orlicz/nfunc.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "orlicz/numerics.hpp"

namespace orlicz {
namespace {

// log(DBL_MAX); exp of anything larger overflows.
constexpr double kMaxExpArg = 709.782712893384;

double checked_exp_arg(double x) {
  if (!(x <= kMaxExpArg)) {
    throw SaturationError("exponential generator saturates at argument " +
                          std::to_string(x));
  }
  return x;
}

// expm1(x) - x without cancellation for small |x|.
double expm1_minus_x(double x) {
  if (std::abs(x) < 0.5) {
    double term = x * x / 2.0;
    double sum = term;
    for (int k = 3; k < 40; ++k) {
      term *= x / k;
      sum += term;
      if (std::abs(term) <= 1e-18 * std::abs(sum)) break;
    }
    return sum;
  }
  return std::expm1(x) - x;
}

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw std::runtime_error("format_number failed");
  return std::string(buf, ptr);
}

double parse_number(std::string_view text, std::string_view key) {
  double value = 0.0;
  auto begin = text.data();
  auto end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) {
    throw DomainError("invalid number '" + std::string(text) + "' for " +
                      std::string(key));
  }
  return value;
}

double parse_tau(std::string_view text) {
  if (text == "tau0") return find_tau0();
  constexpr std::string_view suffix = "*tau0";
  if (text.size() > suffix.size() && text.ends_with(suffix)) {
    return parse_number(text.substr(0, text.size() - suffix.size()), "tau") *
           find_tau0();
  }
  return parse_number(text, "tau");
}

}  // namespace

std::string_view family_name(Family family) {
  switch (family) {
    case Family::ExpStar: return "exp_star";
    case Family::ExpGammaTau: return "exp";
    case Family::ExpGammaTauStar: return "exp_star";
    case Family::TildeExpGammaTau: return "tilde_exp";
    case Family::Power: return "power";
    case Family::ExpAlphaStar: return "exp_alpha";
    case Family::Custom: return "custom";
  }
  return "unknown";
}

NFunction NFunction::exp_star() {
  NFunction f;
  f.family_ = Family::ExpStar;
  return f;
}

NFunction NFunction::exp_gamma_tau(double gamma, double tau) {
  NFunction f;
  f.family_ = Family::ExpGammaTau;
  f.gamma_ = gamma;
  f.tau_ = tau;
  f.validate();
  return f;
}

NFunction NFunction::exp_gamma_tau_star(double gamma, double tau) {
  NFunction f = exp_gamma_tau(gamma, tau);
  f.family_ = Family::ExpGammaTauStar;
  return f;
}

NFunction NFunction::tilde_exp(double gamma, double tau) {
  NFunction f = exp_gamma_tau(gamma, tau);
  f.family_ = Family::TildeExpGammaTau;
  return f;
}

NFunction NFunction::power(double p) {
  NFunction f;
  f.family_ = Family::Power;
  f.p_ = p;
  f.validate();
  return f;
}

NFunction NFunction::exp_alpha_star(double alpha) {
  NFunction f;
  f.family_ = Family::ExpAlphaStar;
  f.alpha_ = alpha;
  f.validate();
  return f;
}

NFunction NFunction::custom(std::string name, Scalar value, Scalar first,
                            Scalar second) {
  if (!value || !first || !second) {
    throw DomainError("custom generator needs value and both derivatives");
  }
  NFunction f;
  f.family_ = Family::Custom;
  f.custom_name_ = std::move(name);
  f.custom_value_ = std::move(value);
  f.custom_first_ = std::move(first);
  f.custom_second_ = std::move(second);
  return f;
}

NFunction NFunction::scaled(double lambda) const {
  NFunction f = *this;
  f.lambda_ = lambda_ * lambda;
  f.validate();
  return f;
}

void NFunction::validate() const {
  if (!(lambda_ > 0.0) || !std::isfinite(lambda_)) {
    throw DomainError("scale lambda must be positive and finite");
  }
  switch (family_) {
    case Family::ExpGammaTau:
    case Family::ExpGammaTauStar:
    case Family::TildeExpGammaTau:
      if (!(gamma_ >= 0.0 && gamma_ <= 1.0)) {
        throw DomainError("gamma must lie in [0, 1]");
      }
      if (!(tau_ > 1.0) || !std::isfinite(tau_)) {
        throw DomainError("tau must be greater than 1");
      }
      break;
    case Family::Power:
      if (!(p_ >= 1.0) || !std::isfinite(p_)) throw DomainError("p must be >= 1");
      break;
    case Family::ExpAlphaStar:
      if (!(alpha_ > 0.0) || !std::isfinite(alpha_)) {
        throw DomainError("alpha must be positive");
      }
      break;
    case Family::ExpStar:
    case Family::Custom:
      break;
  }
}

NFunction NFunction::parse(std::string_view descriptor) {
  const auto colon = descriptor.find(':');
  const std::string_view name = descriptor.substr(0, colon);
  std::map<std::string, std::string, std::less<>> params;
  if (colon != std::string_view::npos) {
    std::string_view rest = descriptor.substr(colon + 1);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const std::string_view item = rest.substr(0, comma);
      const auto eq = item.find('=');
      if (eq == std::string_view::npos || eq == 0) {
        throw DomainError("malformed parameter '" + std::string(item) +
                          "' in descriptor '" + std::string(descriptor) + "'");
      }
      auto [it, inserted] = params.emplace(std::string(item.substr(0, eq)),
                                           std::string(item.substr(eq + 1)));
      if (!inserted) throw DomainError("duplicate parameter '" + it->first + "'");
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
  }

  auto take = [&](std::string_view key) -> std::optional<std::string> {
    auto it = params.find(key);
    if (it == params.end()) return std::nullopt;
    std::string v = it->second;
    params.erase(it);
    return v;
  };
  auto require = [&](std::string_view key) {
    auto v = take(key);
    if (!v) {
      throw DomainError("descriptor '" + std::string(descriptor) +
                        "' is missing parameter '" + std::string(key) + "'");
    }
    return *v;
  };

  const auto lambda_text = take("lambda");
  NFunction f;
  if (name == "exp_star") {
    auto g = take("gamma");
    auto t = take("tau");
    if (g.has_value() != t.has_value()) {
      throw DomainError("exp_star takes both gamma and tau or neither");
    }
    f = g ? exp_gamma_tau_star(parse_number(*g, "gamma"), parse_tau(*t))
          : exp_star();
  } else if (name == "exp") {
    const auto g = require("gamma");
    f = exp_gamma_tau(parse_number(g, "gamma"), parse_tau(require("tau")));
  } else if (name == "tilde_exp") {
    const auto g = require("gamma");
    f = tilde_exp(parse_number(g, "gamma"), parse_tau(require("tau")));
  } else if (name == "power") {
    f = power(parse_number(require("p"), "p"));
  } else if (name == "exp_alpha") {
    f = exp_alpha_star(parse_number(require("alpha"), "alpha"));
  } else {
    throw DomainError("unknown N-function family '" + std::string(name) + "'");
  }
  if (!params.empty()) {
    throw DomainError("unknown parameter '" + params.begin()->first +
                      "' for family '" + std::string(name) + "'");
  }
  if (lambda_text) f = f.scaled(parse_number(*lambda_text, "lambda"));
  return f;
}

std::string NFunction::to_string() const {
  std::ostringstream out;
  switch (family_) {
    case Family::ExpStar:
      out << "exp_star";
      break;
    case Family::ExpGammaTau:
    case Family::ExpGammaTauStar:
    case Family::TildeExpGammaTau:
      out << family_name(family_) << ":gamma=" << format_number(gamma_)
          << ",tau=" << format_number(tau_);
      break;
    case Family::Power:
      out << "power:p=" << format_number(p_);
      break;
    case Family::ExpAlphaStar:
      out << "exp_alpha:alpha=" << format_number(alpha_);
      break;
    case Family::Custom:
      out << "custom:" << custom_name_;
      break;
  }
  if (lambda_ != 1.0) {
    out << (family_ == Family::ExpStar ? ":" : ",") << "lambda="
        << format_number(lambda_);
  }
  return out.str();
}

double NFunction::eval(double t) const {
  if (!(t >= 0.0)) throw DomainError("N-function argument must be >= 0");
  return eval_unscaled(t / lambda_);
}

double NFunction::deriv1(double t) const {
  if (!(t >= 0.0)) throw DomainError("N-function argument must be >= 0");
  return deriv1_unscaled(t / lambda_) / lambda_;
}

double NFunction::deriv2(double t) const {
  if (!(t >= 0.0)) throw DomainError("N-function argument must be >= 0");
  return deriv2_unscaled(t / lambda_) / (lambda_ * lambda_);
}

double NFunction::eval_unscaled(double s) const {
  switch (family_) {
    case Family::ExpStar:
      return std::expm1(checked_exp_arg(s));
    case Family::ExpAlphaStar:
      return std::expm1(checked_exp_arg(alpha_ * s));
    case Family::Power:
      return s == 0.0 ? 0.0 : std::pow(s, p_);
    case Family::Custom:
      return custom_value_(s);
    case Family::ExpGammaTau:
    case Family::ExpGammaTauStar:
    case Family::TildeExpGammaTau:
      break;
  }
  const double log_st = std::log(s + tau_);
  const double x = checked_exp_arg(s / std::pow(log_st, gamma_));
  if (family_ == Family::ExpGammaTau) return std::exp(x);
  if (family_ == Family::ExpGammaTauStar) return std::expm1(x);
  // exp(x) - 1 - s c with c = log(tau)^-gamma, split as
  // (expm1(x) - x) + s c [(log(s+tau)/log(tau))^-gamma - 1].
  const double log_tau = std::log(tau_);
  const double c = std::pow(log_tau, -gamma_);
  const double ratio_log = std::log1p(std::log1p(s / tau_) / log_tau);
  return expm1_minus_x(x) + s * c * std::expm1(-gamma_ * ratio_log);
}

double NFunction::deriv1_unscaled(double s) const {
  switch (family_) {
    case Family::ExpStar:
      return std::exp(checked_exp_arg(s));
    case Family::ExpAlphaStar:
      return alpha_ * std::exp(checked_exp_arg(alpha_ * s));
    case Family::Power:
      if (p_ == 1.0) return 1.0;
      return s == 0.0 ? 0.0 : p_ * std::pow(s, p_ - 1.0);
    case Family::Custom:
      return custom_first_(s);
    case Family::ExpGammaTau:
    case Family::ExpGammaTauStar:
    case Family::TildeExpGammaTau:
      break;
  }
  if (family_ == Family::TildeExpGammaTau && s == 0.0) return 0.0;
  const double st = s + tau_;
  const double L = std::log(st);
  const double x = checked_exp_arg(s / std::pow(L, gamma_));
  const double lead = (L - gamma_ * s / st) / std::pow(L, gamma_ + 1.0);
  if (family_ == Family::TildeExpGammaTau) {
    // d - c regrouped as expm1(x) lead + (L^-gamma - c) - gamma s / (st L^(gamma+1))
    // so that nothing cancels near s = 0.
    const double log_tau = std::log(tau_);
    const double c = std::pow(log_tau, -gamma_);
    const double ratio_log = std::log1p(std::log1p(s / tau_) / log_tau);
    return std::expm1(x) * lead + c * std::expm1(-gamma_ * ratio_log) -
           gamma_ * s / (st * std::pow(L, gamma_ + 1.0));
  }
  return std::exp(x) * lead;
}

double NFunction::deriv2_unscaled(double s) const {
  switch (family_) {
    case Family::ExpStar:
      return std::exp(checked_exp_arg(s));
    case Family::ExpAlphaStar:
      return alpha_ * alpha_ * std::exp(checked_exp_arg(alpha_ * s));
    case Family::Power:
      if (p_ == 1.0) return 0.0;
      if (p_ == 2.0) return 2.0;
      if (s == 0.0) {
        return p_ < 2.0 ? std::numeric_limits<double>::infinity() : 0.0;
      }
      return p_ * (p_ - 1.0) * std::pow(s, p_ - 2.0);
    case Family::Custom:
      return custom_second_(s);
    case Family::ExpGammaTau:
    case Family::ExpGammaTauStar:
    case Family::TildeExpGammaTau:
      break;
  }
  const double st = s + tau_;
  const double L = std::log(st);
  const double Lg = std::pow(L, gamma_);
  const double E = std::exp(checked_exp_arg(s / Lg));
  const double lead = L - gamma_ * s / st;
  const double bracket = lead * lead -
                         L * Lg * gamma_ * (s + 2.0 * tau_) / (st * st) +
                         gamma_ * (gamma_ + 1.0) * s * Lg / (st * st);
  return E * bracket / std::pow(L, 2.0 * gamma_ + 2.0);
}

std::optional<double> NFunction::known_subadditivity_constant() const {
  switch (family_) {
    case Family::ExpStar:
    case Family::ExpAlphaStar:
      return 1.0;
    case Family::ExpGammaTauStar:
      if (gamma_ == 0.0 || tau_ >= find_tau0()) return 1.0;
      return std::nullopt;
    case Family::Power:
      return std::pow(2.0, p_ - 1.0);
    default:
      return std::nullopt;
  }
}

bool NFunction::strictly_convex() const {
  switch (family_) {
    case Family::ExpStar:
    case Family::ExpAlphaStar:
      return true;
    case Family::Power:
      return p_ > 1.0;
    case Family::ExpGammaTau:
    case Family::ExpGammaTauStar:
    case Family::TildeExpGammaTau:
      return gamma_ == 0.0 || tau_ >= find_tau0();
    case Family::Custom:
      return false;
  }
  return false;
}

DerivativeCheck check_derivatives(const NFunction& phi, double lo, double hi, int points,
                                  double tol1, double tol2) {
  if (!(lo >= 0.0 && hi > lo) || points < 1) throw DomainError("invalid derivative grid");
  DerivativeCheck out;
  const double cell = (hi - lo) / points;
  for (int i = 0; i < points; ++i) {
    const double t = lo + (i + 0.5) * cell;
    const double scale = std::max(1.0, t);
    const double h1 = std::min(1e-6 * scale, 0.5 * t);
    const double h2 = std::min(1e-4 * scale, 0.5 * t);
    const double fd1 = (phi(t + h1) - phi(t - h1)) / (2.0 * h1);
    const double fd2 = (phi(t + h2) - 2.0 * phi(t) + phi(t - h2)) / (h2 * h2);
    const double d1 = phi.deriv1(t);
    const double d2 = phi.deriv2(t);
    const double r1 = std::abs(fd1 - d1) / std::max(std::abs(d1), 1e-6);
    const double r2 = std::abs(fd2 - d2) / std::max(std::abs(d2), 1e-6);
    if (r1 > out.max_rel1) {
      out.max_rel1 = r1;
      out.worst_t1 = t;
    }
    if (r2 > out.max_rel2) {
      out.max_rel2 = r2;
      out.worst_t2 = t;
    }
  }
  out.passed = out.max_rel1 <= tol1 && out.max_rel2 <= tol2;
  return out;
}

double tau0_defect(double tau) {
  const double l = std::log(tau);
  return l - 2.0 * (l / tau + 1.0);
}

double find_tau0() {
  // g is increasing for tau >= 1 and negative at e.
  static const double tau0 =
      numerics::bisect_increasing(tau0_defect, std::numbers::e, 100.0, 1e-13);
  return tau0;
}

namespace {

constexpr double kRelTol = 1e-12;

template <typename Lhs, typename Rhs>
VerificationReport check_pairs(std::string name,
                               std::span<const std::pair<double, double>> sample,
                               Lhs lhs_of, Rhs rhs_of) {
  VerificationReport report;
  report.name = std::move(name);
  std::size_t saturated = 0;
  for (const auto& [a, b] : sample) {
    if (!(a >= 0.0) || !(b >= 0.0)) {
      throw DomainError(report.name + ": sample pairs must be nonnegative");
    }
    ++report.samples;
    double lhs = 0.0;
    double rhs = 0.0;
    try {
      lhs = lhs_of(a, b);
      rhs = rhs_of(a, b);
    } catch (const SaturationError&) {
      ++saturated;
      ++report.violations;
      continue;
    }
    const double excess = lhs - rhs;
    if (excess > report.max_excess) {
      report.max_excess = excess;
      report.worst = {a, b};
    }
    if (excess > kRelTol * (1.0 + std::abs(rhs))) ++report.violations;
  }
  report.passed = report.violations == 0;
  std::ostringstream detail;
  detail << report.violations << " violations over " << report.samples
         << " pairs";
  if (saturated > 0) detail << " (" << saturated << " saturated)";
  report.detail = detail.str();
  return report;
}

}  // namespace

VerificationReport check_weak_subadditivity(
    const NFunction& phi, double k,
    std::span<const std::pair<double, double>> sample) {
  if (!(k > 0.0)) throw DomainError("subadditivity constant must be positive");
  return check_pairs(
      "weak_subadditivity", sample,
      [&](double a, double b) { return phi(a + b); },
      [&](double a, double b) {
        const double pa = phi(a);
        const double pb = phi(b);
        return k * (pa * pb + pa + pb);
      });
}

VerificationReport check_submultiplicativity(
    double gamma, double tau, std::span<const std::pair<double, double>> sample) {
  const NFunction e = NFunction::exp_gamma_tau(gamma, tau);
  return check_pairs(
      "submultiplicativity", sample,
      [&](double t, double s) { return e(t + s); },
      [&](double t, double s) { return e(t) * e(s); });
}

std::string_view delta2_class_name(Delta2Class c) {
  switch (c) {
    case Delta2Class::Global: return "global";
    case Delta2Class::NearInfinity: return "near_infinity";
    case Delta2Class::NoneOnRange: return "none_on_range";
  }
  return "unknown";
}

Delta2Report classify_delta2(const NFunction& phi, double lo, double hi,
                             bool finite_measure, double k_cap, int samples) {
  if (!(lo > 0.0) || !(hi > lo) || !std::isfinite(hi)) {
    throw DomainError("delta2 range must satisfy 0 < lo < hi < inf");
  }
  if (samples < 4) throw DomainError("delta2 needs at least 4 samples");
  Delta2Report report;
  report.lo = lo;
  report.hi = hi;
  const auto grid = numerics::logspace(lo, hi, static_cast<std::size_t>(samples));
  const double mid = std::sqrt(lo * hi);
  auto ratio_at = [&](double t) {
    const double base = phi(t);
    if (!(base > 0.0)) {
      throw DomainError("delta2 range touches a zero of phi");
    }
    try {
      return phi(2.0 * t) / base;
    } catch (const SaturationError&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  double mid_ratio = 0.0;
  double last_ratio = 0.0;
  for (double t : grid) {
    const double r = ratio_at(t);
    if (r > report.max_ratio) {
      report.max_ratio = r;
      report.argmax = t;
    }
    if (t >= mid) {
      if (mid_ratio == 0.0) mid_ratio = r;
      report.upper_ratio = std::max(report.upper_ratio, r);
    }
    last_ratio = r;
  }
  report.ratio_growing = !std::isfinite(last_ratio) || last_ratio > 1.01 * mid_ratio;
  if (report.ratio_growing || !(report.upper_ratio <= k_cap)) {
    report.classification = Delta2Class::NoneOnRange;
  } else if (report.max_ratio <= k_cap) {
    report.classification = Delta2Class::Global;
  } else {
    report.classification = Delta2Class::NearInfinity;
  }
  report.delta_regular =
      report.classification == Delta2Class::Global ||
      (report.classification == Delta2Class::NearInfinity && finite_measure);
  return report;
}

}  // namespace orlicz
