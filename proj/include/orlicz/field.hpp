#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace orlicz {

/// Grid too coarse for the requested operation.
class ResolutionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Sub-domain not contained in the parent domain.
class ContainmentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Axis {
  std::string name;
  double lo = 0.0;
  double hi = 1.0;
  bool lo_open = true;
  bool hi_open = true;

  double length() const { return hi - lo; }
  bool operator==(const Axis&) const = default;
};

enum class DomainKind { Interval1D, SpaceTimeBox };

/// Axis-aligned box. A space-time box stores time as axis 0 followed by one
/// or two spatial axes.
class Domain {
 public:
  static Domain interval(double lo, double hi, bool lo_open = true,
                         bool hi_open = true);
  static Domain space_time(Axis time, std::vector<Axis> space);
  /// (t_lo, t_hi) x (x_lo, x_hi), all ends open.
  static Domain box(double t_lo, double t_hi, double x_lo, double x_hi);

  DomainKind kind() const { return kind_; }
  std::size_t dim() const { return axes_.size(); }
  std::size_t spatial_dim() const { return dim() - spatial_offset(); }
  std::size_t spatial_offset() const {
    return kind_ == DomainKind::SpaceTimeBox ? 1 : 0;
  }
  const Axis& axis(std::size_t i) const { return axes_.at(i); }
  const std::vector<Axis>& axes() const { return axes_; }
  double volume() const;

  /// Closed-box containment (endpoint flags are ignored for points).
  bool contains(std::span<const double> p) const;
  bool contains(const Domain& sub) const;
  bool operator==(const Domain&) const = default;

 private:
  DomainKind kind_ = DomainKind::Interval1D;
  std::vector<Axis> axes_;
};

/// Value shape: rows x cols, stored row-major. Scalars are 1 x 1, vectors
/// in R^m are m x 1, spatial gradients of R^m-valued fields are m x n.
struct Arity {
  int rows = 1;
  int cols = 1;

  std::size_t size() const { return static_cast<std::size_t>(rows * cols); }
  bool scalar() const { return rows == 1 && cols == 1; }
  bool operator==(const Arity&) const = default;
};

/// Cell-centered uniform grid over a domain.
struct GridShape {
  std::vector<int> cells;

  std::size_t count() const;
  double width(const Domain& d, std::size_t axis) const;
  double center(const Domain& d, std::size_t axis, int i) const;
};

class Field {
 public:
  using Evaluator = std::function<void(const double* p, double* out)>;
  using ScalarFn = std::function<double(const double* p)>;

  static Field analytic(Domain domain, Arity arity, Evaluator eval,
                        std::string name = {});
  static Field scalar(Domain domain, ScalarFn fn, std::string name = {});
  /// values holds arity.size() entries per cell, cells in row-major order
  /// (last axis fastest). Values must be finite.
  static Field sampled(Domain domain, GridShape grid, Arity arity,
                       std::vector<double> values, std::string name = {});
  static Field zero(Domain domain, Arity arity = {});
  static Field constant(Domain domain, double c);

  /// Copy carrying a registered analytic gradient (arity rows x n).
  Field with_gradient(Field gradient) const;
  Field renamed(std::string name) const;

  const Domain& domain() const { return domain_; }
  Arity arity() const { return arity_; }
  const std::string& name() const { return name_; }
  bool is_sampled() const { return sampled_ != nullptr; }
  const Field* gradient() const { return gradient_.get(); }

  void eval(const double* p, double* out) const;
  double value(const double* p) const;
  double value(std::initializer_list<double> p) const {
    return value(std::data(p));
  }
  /// Frobenius norm of the value at p.
  double norm(const double* p) const;

  const GridShape& grid() const;
  const std::vector<double>& samples() const;

  /// Cell-center samples of this field on a uniform grid.
  Field sample(const GridShape& grid) const;

 private:
  struct Sampled {
    GridShape grid;
    std::vector<double> values;
  };
  void interpolate(const double* p, double* out) const;

  Domain domain_;
  Arity arity_;
  std::string name_;
  Evaluator eval_;
  std::shared_ptr<const Sampled> sampled_;
  std::shared_ptr<const Field> gradient_;
};

/// Positive scalar field with a time-dependence flag.
class Weight {
 public:
  explicit Weight(Field field, bool time_dependent = true);
  static Weight constant(Domain domain, double c);

  double operator()(const double* p) const { return field_.value(p); }
  const Field& field() const { return field_; }
  bool time_dependent() const { return time_dependent_; }

  struct Bounds {
    double min = 0.0;
    double max = 0.0;
  };
  /// Min and max over a cell-centered scan grid; throws DomainError when a
  /// nonpositive or non-finite value is found.
  Bounds scan(int per_axis = 64) const;

 private:
  Field field_;
  bool time_dependent_;
};

struct SingularPoint {
  std::size_t axis = 0;
  double location = 0.0;
};

struct Breakpoint {
  std::size_t axis = 0;
  double location = 0.0;
};

struct QuadratureSpec {
  /// Cells per piece, one entry for all axes or one per axis.
  std::vector<int> cells{128};
  /// Points toward which an axis is dyadically graded. All singular points
  /// must lie on the same axis.
  std::vector<SingularPoint> singular;
  /// Extra piece boundaries (discontinuities of the integrand).
  std::vector<Breakpoint> breakpoints;
  int grading_depth = 0;
  /// Ratio of consecutive layer masses at or above which a layer counts as
  /// non-decaying; three such ratios in the innermost layers mean divergence.
  double divergence_ratio = 0.95;

  int cells_on(std::size_t axis) const;
  void validate(const Domain& d) const;
};

struct QuadResult {
  double value = 0.0;
  bool diverged = false;
  std::size_t evaluations = 0;
  /// Innermost consecutive layer-mass ratios, one per graded side.
  std::vector<double> tail_ratios;
};

/// Tensor-product composite midpoint rule with optional dyadic grading.
class QuadratureRule {
 public:
  QuadratureRule(const Domain& d, const QuadratureSpec& q);

  std::size_t size() const { return weights_.size(); }
  std::size_t dim() const { return dim_; }
  const double* point(std::size_t i) const { return &points_[i * dim_]; }
  double weight(std::size_t i) const { return weights_[i]; }
  const QuadratureSpec& spec() const { return spec_; }

  /// Weighted sum of values[i] (one per node) with divergence detection.
  QuadResult reduce(std::span<const double> values) const;

  /// Evaluates fn at every node (possibly in parallel) then reduces.
  QuadResult integrate(const std::function<double(const double*)>& fn) const;

 private:
  QuadratureSpec spec_;
  std::size_t dim_ = 0;
  std::size_t sides_ = 0;
  std::vector<double> points_;
  std::vector<double> weights_;
  std::vector<int> layer_;  // side * depth + k, or -1
};

QuadResult integrate(const Field& f, const QuadratureSpec& q);

/// Spatial gradient (axes default to the spatial axes). Analytic fields
/// with a registered gradient return it; other analytic fields get a
/// pointwise central difference; sampled fields get a sampled gradient,
/// central inside and second-order one-sided on the boundary cells.
Field finite_diff_gradient(const Field& b, std::vector<std::size_t> axes = {});

Field restrict(const Field& f, const Domain& sub);

}  // namespace orlicz
