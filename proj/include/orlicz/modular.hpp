#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "orlicz/field.hpp"
#include "orlicz/nfunc.hpp"

namespace orlicz {

/// Luxemburg bracket expansion reached 2^60 without N(u/lambda) <= 1.
class BracketFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModularValue {
  double value = 0.0;  // +inf when diverged
  bool diverged = false;
  QuadratureSpec spec;
  std::size_t evaluations = 0;

  bool finite() const { return !diverged; }
};

/// N_phi(u) = integral of phi(|u|), |.| the Frobenius norm. Sampled fields
/// without singular points or breakpoints are integrated on their own cells.
ModularValue modular(const NFunction& phi, const Field& u, const QuadratureSpec& q);

/// Integral of w phi(|Db|).
ModularValue weighted_energy(const NFunction& phi, const Weight& w, const Field& Db,
                             const QuadratureSpec& q);

/// Quadrature nodes and weights frozen together with |u| at the nodes, so
/// that N_phi(u / lambda) can be re-evaluated for many lambda.
class DiscreteModular {
 public:
  DiscreteModular(const Field& u, const QuadratureSpec& q);
  DiscreteModular(QuadratureRule rule, std::vector<double> magnitudes);

  /// N_phi(u / lambda); saturation counts as divergence.
  ModularValue at(const NFunction& phi, double lambda = 1.0) const;

  /// inf{lambda > 0 : N_phi(u / lambda) <= 1}, bracket width <= tol lambda.
  double luxemburg(const NFunction& phi, double tol) const;

  const QuadratureRule& rule() const { return rule_; }
  const std::vector<double>& magnitudes() const { return mags_; }

 private:
  QuadratureRule rule_;
  std::vector<double> mags_;
};

double luxemburg_norm(const NFunction& phi, const Field& u, const QuadratureSpec& q,
                      double tol = 1e-9);

/// Rule used for u under q (own cells for plain sampled fields).
QuadratureRule rule_for(const Field& u, const QuadratureSpec& q);

/// Per-index ladder of named columns plus convergence flags.
class ConvergenceReport {
 public:
  ConvergenceReport() = default;
  ConvergenceReport(std::string index_name, std::vector<double> index, double tol);

  const std::string& index_name() const { return index_name_; }
  const std::vector<double>& index() const { return index_; }
  double tolerance() const { return tol_; }

  void set_column(const std::string& name, std::vector<double> values);
  const std::vector<double>& column(const std::string& name) const;
  bool has_column(const std::string& name) const;
  const std::vector<std::pair<std::string, std::vector<double>>>& columns() const {
    return columns_;
  }

  void set_flag(const std::string& name, bool value);
  bool flag(const std::string& name) const;
  const std::vector<std::pair<std::string, bool>>& flags() const { return flags_; }

  void set_note(const std::string& key, nlohmann::json value);
  const nlohmann::json& notes() const { return notes_; }

  nlohmann::json to_json() const;
  std::string to_csv() const;

 private:
  std::string index_name_ = "h";
  std::vector<double> index_;
  double tol_ = 0.0;
  std::vector<std::pair<std::string, std::vector<double>>> columns_;
  std::vector<std::pair<std::string, bool>> flags_;
  nlohmann::json notes_ = nlohmann::json::object();
};

/// Finite ladder is non-increasing (relative slack 1e-12) and its last entry
/// is below tol.
bool decreasing_below(std::span<const double> values, double tol);

/// Columns: mean (N(u_h - u)), modular_lambda=<l> per ladder entry,
/// energy_gap (|N(u_h) - N(u)|), norm (Luxemburg |u_h - u|), modular_uh.
/// Flags: norm, mean, modular, energy. The smallest passing lambda is
/// stored as the note "modular_lambda".
ConvergenceReport classify_sequence(const NFunction& phi, std::span<const Field> us,
                                    const Field& u, std::span<const double> lambdas,
                                    const QuadratureSpec& q, double tol,
                                    std::span<const double> h_ladder = {},
                                    double norm_tol = 1e-9);

/// N_{phi_2}(f + g) <= (N_phi(f) + N_phi(g)) / 2 with phi_2(t) = phi(t / 2).
VerificationReport check_convexity_split(const NFunction& phi, const Field& f,
                                         const Field& g, const QuadratureSpec& q);

/// Predicate "N_phi(u / lambda) finite" per lambda.
std::vector<std::pair<double, bool>> finite_at_scales(const NFunction& phi,
                                                      const Field& u,
                                                      std::span<const double> lambdas,
                                                      const QuadratureSpec& q);

}  // namespace orlicz
