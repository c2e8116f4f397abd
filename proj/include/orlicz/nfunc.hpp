#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace orlicz {

/// Raised for arguments or parameters outside a function's domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised when an exponential generator would exceed the largest finite double.
class SaturationError : public std::overflow_error {
 public:
  using std::overflow_error::overflow_error;
};

enum class Family {
  ExpStar,           // exp(t) - 1
  ExpGammaTau,       // exp(t / log(t + tau)^gamma)
  ExpGammaTauStar,   // exp_{gamma,tau} - 1
  TildeExpGammaTau,  // exp_{gamma,tau} - 1 - t / log(tau)^gamma
  Power,             // t^p
  ExpAlphaStar,      // exp(alpha t) - 1
  Custom,            // user-supplied generator
};

std::string_view family_name(Family family);

/// Convex generator phi with closed-form first and second derivatives.
///
/// Instances are immutable. The optional scale lambda gives the rescaled
/// generator phi_lambda(t) = phi(t / lambda).
class NFunction {
 public:
  using Scalar = std::function<double(double)>;

  static NFunction exp_star();
  static NFunction exp_gamma_tau(double gamma, double tau);
  static NFunction exp_gamma_tau_star(double gamma, double tau);
  static NFunction tilde_exp(double gamma, double tau);
  static NFunction power(double p);
  static NFunction exp_alpha_star(double alpha);
  /// Plug-in hook for generators outside the built-in families. The caller
  /// vouches for convexity and phi(0) = 0.
  static NFunction custom(std::string name, Scalar value, Scalar first,
                          Scalar second);

  /// Parses "exp_star", "exp:gamma=0.5,tau=20", "exp_star:gamma=1,tau=15",
  /// "tilde_exp:gamma=1,tau=15", "power:p=2", "exp_alpha:alpha=2". Every
  /// family also accepts "lambda=<scale>". tau values may be written as
  /// "tau0" or "<k>*tau0".
  static NFunction parse(std::string_view descriptor);

  /// Normalized descriptor; parse(to_string()) reproduces the instance.
  std::string to_string() const;

  NFunction scaled(double lambda) const;

  Family family() const { return family_; }
  double gamma() const { return gamma_; }
  double tau() const { return tau_; }
  double alpha() const { return alpha_; }
  double p() const { return p_; }
  double lambda() const { return lambda_; }

  double operator()(double t) const { return eval(t); }
  double eval(double t) const;
  double deriv1(double t) const;
  double deriv2(double t) const;

  /// True for families with phi(0) = 0 (every family except ExpGammaTau).
  bool vanishes_at_zero() const { return family_ != Family::ExpGammaTau; }

  /// Smallest valid k for the weak subadditivity inequality when known in
  /// closed form (1 for the exponential families, 2^{p-1} for Power).
  std::optional<double> known_subadditivity_constant() const;

  /// Strict convexity holds for tilde_exp/exp families when tau >= tau0,
  /// for Power with p > 1, and for exp_star/exp_alpha.
  bool strictly_convex() const;

 private:
  NFunction() = default;
  void validate() const;
  double eval_unscaled(double s) const;
  double deriv1_unscaled(double s) const;
  double deriv2_unscaled(double s) const;

  Family family_ = Family::ExpStar;
  double gamma_ = 0.0;
  double tau_ = 0.0;
  double alpha_ = 1.0;
  double p_ = 1.0;
  double lambda_ = 1.0;
  std::string custom_name_;
  Scalar custom_value_;
  Scalar custom_first_;
  Scalar custom_second_;
};

/// Root of g(tau) = log(tau) - 2 (log(tau)/tau + 1). For tau >= tau0 the
/// second derivative of exp_{gamma,tau} is positive for all t >= 0 and all
/// gamma in [0, 1]. The returned value satisfies g(tau0) >= 0.
double find_tau0();

/// The function whose root defines tau0.
double tau0_defect(double tau);

struct VerificationReport {
  std::string name;
  bool passed = true;
  std::size_t samples = 0;
  std::size_t violations = 0;
  /// Largest lhs - rhs seen over the sample (negative when all strict).
  double max_excess = -std::numeric_limits<double>::infinity();
  std::pair<double, double> worst{0.0, 0.0};
  std::string detail;
};

/// phi(a+b) <= k [phi(a) phi(b) + phi(a) + phi(b)], tolerance
/// 1e-12 (1 + rhs).
VerificationReport check_weak_subadditivity(
    const NFunction& phi, double k,
    std::span<const std::pair<double, double>> sample);

/// exp_{gamma,tau}(t+s) <= exp_{gamma,tau}(t) exp_{gamma,tau}(s).
VerificationReport check_submultiplicativity(
    double gamma, double tau, std::span<const std::pair<double, double>> sample);

struct DerivativeCheck {
  double max_rel1 = 0.0;
  double max_rel2 = 0.0;
  double worst_t1 = 0.0;
  double worst_t2 = 0.0;
  bool passed = true;
};

/// Closed-form deriv1/deriv2 against central differences of phi at the
/// midpoints of `points` equal cells of [lo, hi]. Relative errors use
/// max(|exact|, 1e-6) as the denominator.
DerivativeCheck check_derivatives(const NFunction& phi, double lo, double hi,
                                  int points = 200, double tol1 = 1e-5,
                                  double tol2 = 1e-4);

enum class Delta2Class { Global, NearInfinity, NoneOnRange };

std::string_view delta2_class_name(Delta2Class c);

struct Delta2Report {
  Delta2Class classification = Delta2Class::NoneOnRange;
  double max_ratio = 0.0;
  double argmax = 0.0;
  double upper_ratio = 0.0;  // sup over the upper half of the range
  bool ratio_growing = false;
  /// Global, or near infinity on a finite-measure domain.
  bool delta_regular = false;
  double lo = 0.0;
  double hi = 0.0;
};

/// Range-limited Delta_2 classification from sampled ratios phi(2t)/phi(t).
/// A ratio that exceeds k_cap or keeps growing across the upper half of the
/// range is reported as NoneOnRange.
Delta2Report classify_delta2(const NFunction& phi, double lo, double hi,
                             bool finite_measure, double k_cap = 1e4,
                             int samples = 2000);

}  // namespace orlicz
