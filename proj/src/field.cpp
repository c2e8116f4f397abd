#include "orlicz/field.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "orlicz/nfunc.hpp"
#include "orlicz/numerics.hpp"

namespace orlicz {

Domain Domain::interval(double lo, double hi, bool lo_open, bool hi_open) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw DomainError("interval needs finite lo < hi");
  }
  Domain d;
  d.kind_ = DomainKind::Interval1D;
  d.axes_.push_back(Axis{"x", lo, hi, lo_open, hi_open});
  return d;
}

Domain Domain::space_time(Axis time, std::vector<Axis> space) {
  if (space.empty() || space.size() > 2) {
    throw DomainError("space-time box needs one or two spatial axes");
  }
  Domain d;
  d.kind_ = DomainKind::SpaceTimeBox;
  d.axes_.push_back(std::move(time));
  for (auto& a : space) d.axes_.push_back(std::move(a));
  for (const auto& a : d.axes_) {
    if (!(a.lo < a.hi) || !std::isfinite(a.lo) || !std::isfinite(a.hi)) {
      throw DomainError("axis '" + a.name + "' needs finite lo < hi");
    }
  }
  return d;
}

Domain Domain::box(double t_lo, double t_hi, double x_lo, double x_hi) {
  return space_time(Axis{"t", t_lo, t_hi}, {Axis{"x", x_lo, x_hi}});
}

double Domain::volume() const {
  double v = 1.0;
  for (const auto& a : axes_) v *= a.length();
  return v;
}

bool Domain::contains(std::span<const double> p) const {
  if (p.size() < dim()) return false;
  for (std::size_t i = 0; i < dim(); ++i) {
    if (!(p[i] >= axes_[i].lo && p[i] <= axes_[i].hi)) return false;
  }
  return true;
}

bool Domain::contains(const Domain& sub) const {
  if (sub.kind_ != kind_ || sub.dim() != dim()) return false;
  for (std::size_t i = 0; i < dim(); ++i) {
    if (sub.axes_[i].lo < axes_[i].lo || sub.axes_[i].hi > axes_[i].hi) {
      return false;
    }
  }
  return true;
}

std::size_t GridShape::count() const {
  std::size_t n = 1;
  for (int c : cells) n *= static_cast<std::size_t>(c);
  return n;
}

double GridShape::width(const Domain& d, std::size_t axis) const {
  return d.axis(axis).length() / cells.at(axis);
}

double GridShape::center(const Domain& d, std::size_t axis, int i) const {
  return d.axis(axis).lo + (i + 0.5) * width(d, axis);
}

// ---------------------------------------------------------------------------
// Field

Field Field::analytic(Domain domain, Arity arity, Evaluator eval,
                      std::string name) {
  if (arity.rows < 1 || arity.cols < 1) throw DomainError("arity must be positive");
  if (!eval) throw DomainError("analytic field needs an evaluator");
  Field f;
  f.domain_ = std::move(domain);
  f.arity_ = arity;
  f.name_ = std::move(name);
  f.eval_ = std::move(eval);
  return f;
}

Field Field::scalar(Domain domain, ScalarFn fn, std::string name) {
  return analytic(
      std::move(domain), Arity{},
      [fn = std::move(fn)](const double* p, double* out) { out[0] = fn(p); },
      std::move(name));
}

Field Field::sampled(Domain domain, GridShape grid, Arity arity,
                     std::vector<double> values, std::string name) {
  if (grid.cells.size() != domain.dim()) {
    throw ResolutionError("grid rank does not match domain dimension");
  }
  for (int c : grid.cells) {
    if (c < 1) throw ResolutionError("grid needs at least one cell per axis");
  }
  if (values.size() != grid.count() * arity.size()) {
    throw ResolutionError("sample count does not match grid and arity");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw DomainError("sampled values must be finite");
  }
  Field f;
  f.domain_ = std::move(domain);
  f.arity_ = arity;
  f.name_ = std::move(name);
  f.sampled_ = std::make_shared<const Sampled>(
      Sampled{std::move(grid), std::move(values)});
  return f;
}

Field Field::zero(Domain domain, Arity arity) {
  const std::size_t n = arity.size();
  const std::size_t dim = domain.dim();
  Field f = analytic(
      domain, arity, [n](const double*, double* out) { std::fill_n(out, n, 0.0); },
      "zero");
  const auto spatial = static_cast<int>(domain.spatial_dim());
  const Arity garity{static_cast<int>(n), spatial};
  (void)dim;
  return f.with_gradient(analytic(
      domain, garity,
      [m = garity.size()](const double*, double* out) { std::fill_n(out, m, 0.0); },
      "zero_gradient"));
}

Field Field::constant(Domain domain, double c) {
  const auto spatial = static_cast<int>(domain.spatial_dim());
  Field f = scalar(domain, [c](const double*) { return c; }, "constant");
  return f.with_gradient(analytic(
      domain, Arity{1, spatial},
      [spatial](const double*, double* out) { std::fill_n(out, spatial, 0.0); },
      "constant_gradient"));
}

Field Field::with_gradient(Field gradient) const {
  const auto spatial = static_cast<int>(domain_.spatial_dim());
  if (gradient.arity().rows != static_cast<int>(arity_.size()) ||
      gradient.arity().cols != spatial) {
    throw DomainError("gradient arity must be (components x spatial axes)");
  }
  Field f = *this;
  f.gradient_ = std::make_shared<const Field>(std::move(gradient));
  return f;
}

Field Field::renamed(std::string name) const {
  Field f = *this;
  f.name_ = std::move(name);
  return f;
}

const GridShape& Field::grid() const {
  if (!sampled_) throw DomainError("field '" + name_ + "' is not sampled");
  return sampled_->grid;
}

const std::vector<double>& Field::samples() const {
  if (!sampled_) throw DomainError("field '" + name_ + "' is not sampled");
  return sampled_->values;
}

void Field::eval(const double* p, double* out) const {
  if (sampled_) {
    interpolate(p, out);
  } else {
    eval_(p, out);
  }
}

double Field::value(const double* p) const {
  if (!arity_.scalar()) throw DomainError("field '" + name_ + "' is not scalar");
  double out = 0.0;
  eval(p, &out);
  return out;
}

double Field::norm(const double* p) const {
  if (arity_.scalar()) return std::abs(value(p));
  double buf[16];
  std::vector<double> heap;
  double* out = buf;
  if (arity_.size() > 16) {
    heap.resize(arity_.size());
    out = heap.data();
  }
  eval(p, out);
  double s = 0.0;
  for (std::size_t i = 0; i < arity_.size(); ++i) s += out[i] * out[i];
  return std::sqrt(s);
}

void Field::interpolate(const double* p, double* out) const {
  const auto& grid = sampled_->grid;
  const auto& values = sampled_->values;
  const std::size_t dim = domain_.dim();
  const std::size_t comps = arity_.size();
  // Per axis: lower index, upper index, upper weight.
  int lo_idx[3] = {0, 0, 0};
  int hi_idx[3] = {0, 0, 0};
  double frac[3] = {0.0, 0.0, 0.0};
  for (std::size_t a = 0; a < dim; ++a) {
    const int n = grid.cells[a];
    const double h = grid.width(domain_, a);
    const double s = (p[a] - domain_.axis(a).lo) / h - 0.5;
    if (n == 1 || s <= 0.0) {
      lo_idx[a] = hi_idx[a] = 0;
    } else if (s >= n - 1) {
      lo_idx[a] = hi_idx[a] = n - 1;
    } else {
      lo_idx[a] = static_cast<int>(std::floor(s));
      hi_idx[a] = lo_idx[a] + 1;
      frac[a] = s - lo_idx[a];
    }
  }
  std::fill_n(out, comps, 0.0);
  const std::size_t corners = std::size_t{1} << dim;
  for (std::size_t c = 0; c < corners; ++c) {
    double weight = 1.0;
    std::size_t flat = 0;
    for (std::size_t a = 0; a < dim; ++a) {
      const bool upper = (c >> a) & 1U;
      weight *= upper ? frac[a] : 1.0 - frac[a];
      flat = flat * static_cast<std::size_t>(grid.cells[a]) +
             static_cast<std::size_t>(upper ? hi_idx[a] : lo_idx[a]);
    }
    if (weight == 0.0) continue;
    for (std::size_t k = 0; k < comps; ++k) out[k] += weight * values[flat * comps + k];
  }
}

Field Field::sample(const GridShape& grid) const {
  const std::size_t dim = domain_.dim();
  if (grid.cells.size() != dim) throw ResolutionError("grid rank mismatch");
  const std::size_t count = grid.count();
  const std::size_t comps = arity_.size();
  std::vector<double> values(count * comps);
  numerics::parallel_for(count, [&](std::size_t flat) {
    double p[3];
    std::size_t rest = flat;
    for (std::size_t a = dim; a-- > 0;) {
      const auto n = static_cast<std::size_t>(grid.cells[a]);
      p[a] = grid.center(domain_, a, static_cast<int>(rest % n));
      rest /= n;
    }
    eval(p, &values[flat * comps]);
  });
  return sampled(domain_, grid, arity_, std::move(values), name_);
}

// ---------------------------------------------------------------------------
// Weight

Weight::Weight(Field field, bool time_dependent)
    : field_(std::move(field)), time_dependent_(time_dependent) {
  if (!field_.arity().scalar()) throw DomainError("weight must be scalar");
}

Weight Weight::constant(Domain domain, double c) {
  if (!(c > 0.0)) throw DomainError("weight must be positive");
  return Weight(Field::constant(std::move(domain), c).renamed("one"), false);
}

Weight::Bounds Weight::scan(int per_axis) const {
  GridShape grid{std::vector<int>(field_.domain().dim(), per_axis)};
  const auto sampled = field_.sample(grid);
  Bounds b{std::numeric_limits<double>::infinity(), 0.0};
  for (double v : sampled.samples()) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw DomainError("weight is not positive and finite on the scan grid");
    }
    b.min = std::min(b.min, v);
    b.max = std::max(b.max, v);
  }
  return b;
}

// ---------------------------------------------------------------------------
// Quadrature

int QuadratureSpec::cells_on(std::size_t axis) const {
  if (cells.size() == 1) return cells[0];
  return cells.at(axis);
}

void QuadratureSpec::validate(const Domain& d) const {
  if (cells.empty() || (cells.size() != 1 && cells.size() != d.dim())) {
    throw ResolutionError("cells needs one entry or one per axis");
  }
  for (int c : cells) {
    if (c < 2) throw ResolutionError("quadrature needs at least 2 cells per axis");
  }
  if (grading_depth < 0) throw ResolutionError("grading depth must be >= 0");
  if (!(divergence_ratio > 0.0)) {
    throw ResolutionError("divergence ratio must be positive");
  }
  for (const auto& s : singular) {
    if (s.axis >= d.dim()) throw ResolutionError("singular point axis out of range");
    if (s.axis != singular.front().axis) {
      throw ResolutionError("singular points must share one axis");
    }
    const auto& a = d.axis(s.axis);
    if (!(s.location >= a.lo && s.location <= a.hi)) {
      throw ResolutionError("singular point outside the domain");
    }
  }
  for (const auto& b : breakpoints) {
    if (b.axis >= d.dim()) throw ResolutionError("breakpoint axis out of range");
  }
}

namespace {

struct Rule1D {
  std::vector<double> x;
  std::vector<double> w;
  std::vector<int> layer;
};

void add_uniform(Rule1D& r, double a, double b, int cells, int layer) {
  const double h = (b - a) / cells;
  for (int i = 0; i < cells; ++i) {
    r.x.push_back(a + (i + 0.5) * h);
    r.w.push_back(h);
    r.layer.push_back(layer);
  }
}

// Uniform cells on [a, b], split at the breakpoints strictly inside.
void add_pieces(Rule1D& r, double a, double b, const std::vector<double>& cuts,
                int cells, int layer) {
  double left = a;
  for (double c : cuts) {
    if (c > left && c < b) {
      add_uniform(r, left, c, cells, layer);
      left = c;
    }
  }
  add_uniform(r, left, b, cells, layer);
}

// Dyadic layers from s toward s + dir * len; layer ids side * depth + k.
void add_graded(Rule1D& r, double s, double len, int dir, int depth, int side,
                const std::vector<double>& cuts, int cells) {
  auto interval = [&](double near, double far) {
    const double a = s + dir * near;
    const double b = s + dir * far;
    return dir > 0 ? std::pair{a, b} : std::pair{b, a};
  };
  for (int k = 0; k < depth; ++k) {
    const double far = len * std::ldexp(1.0, -k);
    const double near = len * std::ldexp(1.0, -k - 1);
    const auto [a, b] = interval(near, far);
    add_pieces(r, a, b, cuts, cells, side * depth + k);
  }
  const auto [a, b] = interval(0.0, len * std::ldexp(1.0, -depth));
  add_pieces(r, a, b, cuts, cells, -1);
}

Rule1D build_axis(const Axis& axis, std::size_t index, const QuadratureSpec& q,
                  std::size_t& sides) {
  Rule1D r;
  const int cells = q.cells_on(index);
  std::vector<double> cuts;
  for (const auto& b : q.breakpoints) {
    if (b.axis == index && b.location > axis.lo && b.location < axis.hi) {
      cuts.push_back(b.location);
    }
  }
  std::vector<double> sing;
  for (const auto& s : q.singular) {
    if (s.axis == index) sing.push_back(s.location);
  }
  std::sort(sing.begin(), sing.end());
  sing.erase(std::unique(sing.begin(), sing.end()), sing.end());
  if (q.grading_depth == 0) {
    cuts.insert(cuts.end(), sing.begin(), sing.end());
    sing.clear();
  }
  std::sort(cuts.begin(), cuts.end());
  if (sing.empty()) {
    add_pieces(r, axis.lo, axis.hi, cuts, cells, -1);
    return r;
  }
  const int depth = q.grading_depth;
  std::vector<double> ends{axis.lo};
  for (double s : sing) {
    if (s > axis.lo && s < axis.hi) ends.push_back(s);
  }
  ends.push_back(axis.hi);
  auto is_singular = [&](double x) {
    return std::find(sing.begin(), sing.end(), x) != sing.end();
  };
  for (std::size_t i = 0; i + 1 < ends.size(); ++i) {
    const double a = ends[i];
    const double b = ends[i + 1];
    const bool left = is_singular(a);
    const bool right = is_singular(b);
    if (left && right) {
      const double m = 0.5 * (a + b);
      add_graded(r, a, m - a, +1, depth, static_cast<int>(sides++), cuts, cells);
      add_graded(r, b, b - m, -1, depth, static_cast<int>(sides++), cuts, cells);
    } else if (left) {
      add_graded(r, a, b - a, +1, depth, static_cast<int>(sides++), cuts, cells);
    } else if (right) {
      add_graded(r, b, b - a, -1, depth, static_cast<int>(sides++), cuts, cells);
    } else {
      add_pieces(r, a, b, cuts, cells, -1);
    }
  }
  return r;
}

}  // namespace

QuadratureRule::QuadratureRule(const Domain& d, const QuadratureSpec& q)
    : spec_(q), dim_(d.dim()) {
  q.validate(d);
  std::vector<Rule1D> rules;
  for (std::size_t a = 0; a < dim_; ++a) rules.push_back(build_axis(d.axis(a), a, q, sides_));
  std::size_t total = 1;
  for (const auto& r : rules) total *= r.x.size();
  points_.resize(total * dim_);
  weights_.resize(total);
  layer_.resize(total);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rest = flat;
    double w = 1.0;
    int layer = -1;
    for (std::size_t a = dim_; a-- > 0;) {
      const auto& r = rules[a];
      const std::size_t i = rest % r.x.size();
      rest /= r.x.size();
      points_[flat * dim_ + a] = r.x[i];
      w *= r.w[i];
      if (r.layer[i] >= 0) layer = r.layer[i];
    }
    weights_[flat] = w;
    layer_[flat] = layer;
  }
}

QuadResult QuadratureRule::reduce(std::span<const double> values) const {
  if (values.size() != size()) throw std::invalid_argument("value count mismatch");
  QuadResult out;
  out.evaluations = size();
  const auto depth = static_cast<std::size_t>(spec_.grading_depth);
  std::vector<numerics::CompensatedSum> mass(sides_ * depth);
  numerics::CompensatedSum total;
  bool finite = true;
  for (std::size_t i = 0; i < size(); ++i) {
    const double v = values[i];
    if (std::isnan(v)) throw DomainError("integrand evaluated to NaN");
    if (!std::isfinite(v)) {
      finite = false;
      continue;
    }
    const double c = weights_[i] * v;
    total.add(c);
    if (layer_[i] >= 0) mass[static_cast<std::size_t>(layer_[i])].add(std::abs(c));
  }
  out.value = total.value();
  if (!finite || !std::isfinite(out.value)) {
    out.diverged = true;
    out.value = std::numeric_limits<double>::infinity();
  }
  if (depth >= 4) {
    auto ratio = [](double num, double den) {
      if (den > 0.0) return num / den;
      return num > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    };
    for (std::size_t s = 0; s < sides_; ++s) {
      const auto c = [&](std::size_t k) { return mass[s * depth + k].value(); };
      bool growing = c(depth - 1) > 0.0;
      for (std::size_t k = depth - 1; k >= depth - 3; --k) {
        if (ratio(c(k), c(k - 1)) < spec_.divergence_ratio) growing = false;
      }
      out.tail_ratios.push_back(ratio(c(depth - 1), c(depth - 2)));
      if (growing) out.diverged = true;
    }
  }
  if (out.diverged) out.value = std::numeric_limits<double>::infinity();
  return out;
}

QuadResult QuadratureRule::integrate(
    const std::function<double(const double*)>& fn) const {
  std::vector<double> values(size());
  numerics::parallel_for(size(), [&](std::size_t i) { values[i] = fn(point(i)); });
  return reduce(values);
}

QuadResult integrate(const Field& f, const QuadratureSpec& q) {
  if (!f.arity().scalar()) throw DomainError("integrate needs a scalar field");
  if (f.is_sampled() && q.singular.empty() && q.breakpoints.empty()) {
    // Exact midpoint sum over the field's own cells.
    const auto& grid = f.grid();
    double cell = 1.0;
    for (std::size_t a = 0; a < f.domain().dim(); ++a) cell *= grid.width(f.domain(), a);
    numerics::CompensatedSum sum;
    for (double v : f.samples()) sum.add(cell * v);
    QuadResult r;
    r.value = sum.value();
    r.evaluations = f.samples().size();
    return r;
  }
  QuadratureRule rule(f.domain(), q);
  return rule.integrate([&](const double* p) { return f.value(p); });
}

// ---------------------------------------------------------------------------
// Gradients and restriction

namespace {

std::vector<std::size_t> default_axes(const Domain& d,
                                      std::vector<std::size_t> axes) {
  if (axes.empty()) {
    for (std::size_t a = d.spatial_offset(); a < d.dim(); ++a) axes.push_back(a);
  }
  for (auto a : axes) {
    if (a >= d.dim()) throw DomainError("gradient axis out of range");
  }
  return axes;
}

bool same_axes(const Domain& d, const std::vector<std::size_t>& axes) {
  if (axes.size() != d.spatial_dim()) return false;
  for (std::size_t i = 0; i < axes.size(); ++i) {
    if (axes[i] != d.spatial_offset() + i) return false;
  }
  return true;
}

Field sampled_gradient(const Field& b, const std::vector<std::size_t>& axes) {
  const auto& d = b.domain();
  const auto& grid = b.grid();
  const std::size_t dim = d.dim();
  const std::size_t comps = b.arity().size();
  const std::size_t cols = axes.size();
  for (auto a : axes) {
    if (grid.cells[a] < 3) {
      throw ResolutionError("finite differences need at least 3 cells per axis");
    }
  }
  const auto& v = b.samples();
  const std::size_t count = grid.count();
  std::vector<double> out(count * comps * cols);
  std::vector<std::size_t> stride(dim, 1);
  for (std::size_t a = dim - 1; a-- > 0;) {
    stride[a] = stride[a + 1] * static_cast<std::size_t>(grid.cells[a + 1]);
  }
  for (std::size_t flat = 0; flat < count; ++flat) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t a = axes[c];
      const int n = grid.cells[a];
      const int i = static_cast<int>((flat / stride[a]) % static_cast<std::size_t>(n));
      const double h = grid.width(d, a);
      const auto at = [&](int j, std::size_t k) {
        const auto shifted = static_cast<std::ptrdiff_t>(flat) +
                             static_cast<std::ptrdiff_t>(j - i) *
                                 static_cast<std::ptrdiff_t>(stride[a]);
        return v[static_cast<std::size_t>(shifted) * comps + k];
      };
      for (std::size_t k = 0; k < comps; ++k) {
        double g = 0.0;
        if (i == 0) {
          g = (-3.0 * at(0, k) + 4.0 * at(1, k) - at(2, k)) / (2.0 * h);
        } else if (i == n - 1) {
          g = (3.0 * at(n - 1, k) - 4.0 * at(n - 2, k) + at(n - 3, k)) / (2.0 * h);
        } else {
          g = (at(i + 1, k) - at(i - 1, k)) / (2.0 * h);
        }
        out[(flat * comps + k) * cols + c] = g;
      }
    }
  }
  return Field::sampled(d, grid,
                        Arity{static_cast<int>(comps), static_cast<int>(cols)},
                        std::move(out), b.name() + "_gradient");
}

Field pointwise_gradient(const Field& b, const std::vector<std::size_t>& axes) {
  const std::size_t comps = b.arity().size();
  const std::size_t cols = axes.size();
  const std::size_t dim = b.domain().dim();
  auto eval = [b, axes, comps, cols, dim](const double* p, double* out) {
    double q[3];
    std::vector<double> f0(comps), f1(comps), f2(comps);
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t a = axes[c];
      const auto& axis = b.domain().axis(a);
      const double h = 1e-6 * std::max(1.0, axis.length());
      std::copy_n(p, dim, q);
      if (p[a] - h >= axis.lo && p[a] + h <= axis.hi) {
        q[a] = p[a] + h;
        b.eval(q, f1.data());
        q[a] = p[a] - h;
        b.eval(q, f0.data());
        for (std::size_t k = 0; k < comps; ++k) {
          out[k * cols + c] = (f1[k] - f0[k]) / (2.0 * h);
        }
      } else {
        const double dir = p[a] - h < axis.lo ? 1.0 : -1.0;
        b.eval(q, f0.data());
        q[a] = p[a] + dir * h;
        b.eval(q, f1.data());
        q[a] = p[a] + 2.0 * dir * h;
        b.eval(q, f2.data());
        for (std::size_t k = 0; k < comps; ++k) {
          out[k * cols + c] = dir * (-3.0 * f0[k] + 4.0 * f1[k] - f2[k]) / (2.0 * h);
        }
      }
    }
  };
  return Field::analytic(b.domain(),
                         Arity{static_cast<int>(comps), static_cast<int>(cols)},
                         std::move(eval), b.name() + "_gradient");
}

}  // namespace

Field finite_diff_gradient(const Field& b, std::vector<std::size_t> axes) {
  axes = default_axes(b.domain(), std::move(axes));
  if (b.gradient() && same_axes(b.domain(), axes)) return *b.gradient();
  if (b.is_sampled()) return sampled_gradient(b, axes);
  return pointwise_gradient(b, axes);
}

Field restrict(const Field& f, const Domain& sub) {
  if (!f.domain().contains(sub)) {
    throw ContainmentError("restriction domain is not contained in the field's domain");
  }
  if (sub == f.domain()) return f;
  Field r = Field::analytic(
      sub, f.arity(), [f](const double* p, double* out) { f.eval(p, out); },
      f.name());
  if (f.gradient()) r = r.with_gradient(restrict(*f.gradient(), sub));
  return r;
}

}  // namespace orlicz
