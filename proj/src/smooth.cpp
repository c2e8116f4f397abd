#include "orlicz/smooth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "orlicz/io.hpp"
#include "orlicz/numerics.hpp"

namespace orlicz {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double frob(const double* v, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += v[i] * v[i];
  return std::sqrt(s);
}

// e^{-1/s} for s > 0.
double edge(double s) { return s > 0.0 ? std::exp(-1.0 / s) : 0.0; }

}  // namespace

double smooth_step(double u, double* derivative) {
  const double s = 0.5 * (u + 1.0);
  if (s <= 0.0) {
    if (derivative) *derivative = 0.0;
    return 0.0;
  }
  if (s >= 1.0) {
    if (derivative) *derivative = 0.0;
    return 1.0;
  }
  const double a = edge(s);
  const double b = edge(1.0 - s);
  const double sum = a + b;
  if (derivative) {
    const double da = a / (s * s);
    const double db = b / ((1.0 - s) * (1.0 - s));
    // d/ds [a / (a + b)] with b' = -db; the chain factor is 1/2.
    *derivative = 0.5 * (da * b + a * db) / (sum * sum);
  }
  return a / sum;
}

// ---------------------------------------------------------------------------
// Cover

ExhaustionCover::ExhaustionCover(Domain q, int j_max) : q_(std::move(q)), j_max_(j_max) {
  for (int j = 1; j <= j_max_; ++j) {
    // Q_j is nonempty exactly when U_{j+1} is.
    const double r = 1.0 / (j + 1);
    bool nonempty = true;
    double s_ell = 0.0;
    double x2 = 0.0;
    for (std::size_t a = 0; a < q_.dim(); ++a) {
      const double lo = q_.axis(a).lo + r;
      const double hi = q_.axis(a).hi - r;
      if (!(lo < hi)) {
        nonempty = false;
        break;
      }
      const double c = std::clamp(0.0, lo, hi);
      if (q_.kind() == DomainKind::SpaceTimeBox && a == 0) {
        s_ell = std::abs(c);
      } else {
        x2 += c * c;
      }
    }
    if (nonempty && !(s_ell + std::sqrt(x2) < j + 1)) nonempty = false;
    (nonempty ? rings_ : empty_).push_back(j);
  }
}

double ExhaustionCover::dist(const double* p) const {
  double d = kInf;
  for (std::size_t a = 0; a < q_.dim(); ++a) {
    d = std::min({d, p[a] - q_.axis(a).lo, q_.axis(a).hi - p[a]});
  }
  return d;
}

double ExhaustionCover::ell(const double* p) const {
  const std::size_t off = q_.spatial_offset();
  double x2 = 0.0;
  for (std::size_t a = off; a < q_.dim(); ++a) x2 += p[a] * p[a];
  return (off ? std::abs(p[0]) : 0.0) + std::sqrt(x2);
}

bool ExhaustionCover::in_u(int j, const double* p) const {
  if (j <= 0) return false;
  return dist(p) > 1.0 / j && ell(p) < j;
}

bool ExhaustionCover::in_ring(int j, const double* p) const {
  if (!in_u(j + 1, p)) return false;
  if (j - 1 <= 0) return true;
  const bool in_closure = dist(p) >= 1.0 / (j - 1) && ell(p) <= j - 1;
  return !in_closure;
}

int ExhaustionCover::multiplicity(const double* p) const {
  int m = 0;
  for (int j = 1; j <= j_max_; ++j) m += in_ring(j, p) ? 1 : 0;
  return m;
}

ExhaustionCover::Audit ExhaustionCover::audit(double margin, int per_axis) const {
  Audit out;
  GridShape grid{std::vector<int>(q_.dim(), per_axis)};
  const std::size_t count = grid.count();
  double p[3];
  for (std::size_t flat = 0; flat < count; ++flat) {
    std::size_t rest = flat;
    for (std::size_t a = q_.dim(); a-- > 0;) {
      p[a] = grid.center(q_, a, static_cast<int>(rest % static_cast<std::size_t>(per_axis)));
      rest /= static_cast<std::size_t>(per_axis);
    }
    if (dist(p) < margin) continue;
    ++out.points;
    const int m = multiplicity(p);
    if (m == 0) ++out.uncovered;
    out.max_multiplicity = std::max(out.max_multiplicity, m);
  }
  // Every ring lies in U_{j+1}, whose closure keeps distance >= 1/(j+1) > 0.
  out.margins_positive = j_max_ >= 1;
  return out;
}

ExhaustionCover build_cover(const Domain& q, int j_max, double margin) {
  if (j_max < 3) throw DomainError("j_max must be at least 3");
  const double reach = 1.0 / (j_max + 1);
  if (margin > 0.0 && margin <= reach) {
    throw DomainError("j_max " + std::to_string(j_max) +
                      " is too small to cover the interior margin " +
                      io::format_double(margin));
  }
  return ExhaustionCover(q, j_max);
}

// ---------------------------------------------------------------------------
// Partition

PartitionOfUnity::PartitionOfUnity(ExhaustionCover cover, double fraction)
    : cover_(std::move(cover)), fraction_(fraction) {
  if (!(fraction > 0.0 && fraction <= 0.25)) {
    throw DomainError("partition fraction must lie in (0, 1/4]");
  }
  if (cover_.domain().dim() > 3) throw DomainError("at most 3 axes are supported");
}

PartitionOfUnity build_partition(const ExhaustionCover& cover, double fraction) {
  return PartitionOfUnity(cover, fraction);
}

double PartitionOfUnity::eta(int k) const {
  return fraction_ / (2.0 * k * (k + 1.0));
}

double PartitionOfUnity::reach() const {
  const int k = cover_.j_max() + 1;
  return 1.0 / k + 3.0 * eta(k);
}

bool PartitionOfUnity::covered(const double* p) const {
  return cover_.dist(p) >= reach() &&
         cover_.ell(p) <= cover_.j_max() + 1 - 3.0 * eta_ell();
}

Domain PartitionOfUnity::covered_box() const {
  const auto& q = cover_.domain();
  const double r = reach();
  std::vector<Axis> axes = q.axes();
  for (auto& a : axes) {
    a.lo += r;
    a.hi -= r;
    if (!(a.lo < a.hi)) throw DomainError("covered region is empty");
  }
  if (q.kind() == DomainKind::Interval1D) {
    return Domain::interval(axes[0].lo, axes[0].hi);
  }
  Axis t = axes.front();
  axes.erase(axes.begin());
  return Domain::space_time(std::move(t), std::move(axes));
}

namespace {

// Product of smooth steps approximating {dist > r} with ramp half-width eta,
// times a smooth step in ell approximating {ell < big_r}.
double box_ell_factor(const ExhaustionCover& cover, double r, double eta, double big_r,
                      double eta_ell, const double* p, double* grad) {
  const auto& q = cover.domain();
  const std::size_t dim = q.dim();
  double fac[3];
  double der[3];
  double value = 1.0;
  for (std::size_t a = 0; a < dim; ++a) {
    double d1 = 0.0;
    double d2 = 0.0;
    const double s1 = smooth_step((p[a] - q.axis(a).lo - r) / eta, &d1);
    if (s1 == 0.0) {
      if (grad) std::fill_n(grad, dim, 0.0);
      return 0.0;
    }
    const double s2 = smooth_step((q.axis(a).hi - r - p[a]) / eta, &d2);
    if (s2 == 0.0) {
      if (grad) std::fill_n(grad, dim, 0.0);
      return 0.0;
    }
    fac[a] = s1 * s2;
    der[a] = (d1 * s2 - s1 * d2) / eta;
    value *= fac[a];
  }
  const double ell = cover.ell(p);
  double dl = 0.0;
  const double lf = smooth_step((big_r - ell) / eta_ell, &dl);
  if (lf == 0.0) {
    if (grad) std::fill_n(grad, dim, 0.0);
    return 0.0;
  }
  if (grad) {
    const std::size_t off = q.spatial_offset();
    double xnorm = 0.0;
    for (std::size_t a = off; a < dim; ++a) xnorm += p[a] * p[a];
    xnorm = std::sqrt(xnorm);
    for (std::size_t a = 0; a < dim; ++a) {
      double others = 1.0;
      for (std::size_t b = 0; b < dim; ++b) {
        if (b != a) others *= fac[b];
      }
      double dell = 0.0;
      if (off && a == 0) {
        dell = p[0] > 0.0 ? 1.0 : (p[0] < 0.0 ? -1.0 : 0.0);
      } else if (xnorm > 0.0) {
        dell = p[a] / xnorm;
      }
      grad[a] = der[a] * others * lf + value * (-dl / eta_ell) * dell;
    }
  }
  return value * lf;
}

}  // namespace

double PartitionOfUnity::level_factor(int k, bool inner, const double* p,
                                      double* grad) const {
  if (k <= 0) {
    if (grad) std::fill_n(grad, dim(), 0.0);
    return 0.0;
  }
  const double e = eta(k);
  const double el = eta_ell();
  const double r = inner ? 1.0 / k + 2.0 * e : 1.0 / k - 2.0 * e;
  const double big_r = inner ? k - 2.0 * el : k + 2.0 * el;
  return box_ell_factor(cover_, r, e, big_r, el, p, grad);
}

double PartitionOfUnity::g(int j, const double* p, double* grad) const {
  double gi[3] = {0, 0, 0};
  double go[3] = {0, 0, 0};
  const double in = level_factor(j + 1, true, p, grad ? gi : nullptr);
  if (in == 0.0) {
    if (grad) std::fill_n(grad, dim(), 0.0);
    return 0.0;
  }
  const double out = level_factor(j - 1, false, p, grad ? go : nullptr);
  if (grad) {
    for (std::size_t a = 0; a < dim(); ++a) grad[a] = gi[a] - go[a];
  }
  return in - out;
}

int PartitionOfUnity::evaluate(const double* p, Active* out) const {
  const double d = cover_.dist(p);
  if (!(d > 0.0)) throw DomainError("point outside the domain");
  const double kappa = std::max(1.0 / d, cover_.ell(p));
  const int lo = std::max(1, static_cast<int>(std::floor(kappa)) - 2);
  const int hi = std::min(cover_.j_max(), static_cast<int>(std::ceil(kappa)) + 2);
  int count = 0;
  double sum = 0.0;
  double sgrad[3] = {0, 0, 0};
  for (int j = lo; j <= hi; ++j) {
    Active a;
    a.j = j;
    a.zeta = g(j, p, a.grad);
    if (a.zeta <= 0.0) continue;
    if (count == 8) throw std::logic_error("partition multiplicity exceeds 8");
    sum += a.zeta;
    for (std::size_t k = 0; k < dim(); ++k) sgrad[k] += a.grad[k];
    out[count++] = a;
  }
  if (!(sum > 0.0)) throw DomainError("point outside the region covered by the partition");
  for (int i = 0; i < count; ++i) {
    auto& a = out[i];
    a.zeta /= sum;
    for (std::size_t k = 0; k < dim(); ++k) a.grad[k] = (a.grad[k] - a.zeta * sgrad[k]) / sum;
  }
  return count;
}

double PartitionOfUnity::zeta(int j, const double* p) const {
  Active act[8];
  const int n = evaluate(p, act);
  for (int i = 0; i < n; ++i) {
    if (act[i].j == j) return act[i].zeta;
  }
  return 0.0;
}

double PartitionOfUnity::zeta_sum(const double* p) const {
  Active act[8];
  const int n = evaluate(p, act);
  numerics::CompensatedSum s;
  for (int i = 0; i < n; ++i) s.add(act[i].zeta);
  return s.value();
}

double PartitionOfUnity::psi_zero_dist(int j) const { return 0.25 / (j + 1); }
double PartitionOfUnity::psi_one_dist(int j) const { return 0.75 / (j + 1); }
double PartitionOfUnity::psi_one_ell(int j) const { return j + 1.5; }

double PartitionOfUnity::psi(int j, const double* p, double* grad) const {
  const double a = 1.0 / (j + 1);
  return box_ell_factor(cover_, 0.5 * a, 0.25 * a, j + 2.0, 0.5, p, grad);
}

// ---------------------------------------------------------------------------
// Mollifier

double Mollifier::normalization(std::size_t dim) {
  static const auto table = [] {
    std::array<double, 4> c{};
    constexpr int kCells = 1 << 18;
    const double h = 1.0 / kCells;
    for (std::size_t d = 1; d <= 3; ++d) {
      numerics::CompensatedSum s;
      for (int i = 0; i < kCells; ++i) {
        const double r = (i + 0.5) * h;
        s.add(std::pow(r, static_cast<double>(d - 1)) * std::exp(1.0 / (r * r - 1.0)) * h);
      }
      const double sphere = d == 1 ? 2.0 : (d == 2 ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi);
      c[d] = 1.0 / (sphere * s.value());
    }
    return c;
  }();
  if (dim < 1 || dim > 3) throw DomainError("mollifier dimension must be 1, 2 or 3");
  return table[dim];
}

Mollifier::Mollifier(double eps, std::size_t dim, Variant variant, int cells_per_axis)
    : eps_(eps), dim_(dim), variant_(variant) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw DomainError("mollifier radius must be positive");
  if (dim < 1 || dim > 3) throw DomainError("mollifier dimension must be 1, 2 or 3");
  if (cells_per_axis < 16) throw DomainError("mollifier needs at least 16 cells per axis");
  const std::size_t kdim = variant == Variant::TimeOnly ? 1 : dim;
  const double h = 2.0 / cells_per_axis;
  const auto n = static_cast<std::size_t>(cells_per_axis);
  std::size_t total = 1;
  for (std::size_t a = 0; a < kdim; ++a) total *= n;
  std::vector<double> raw;
  numerics::CompensatedSum sum;
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rest = flat;
    double u[3] = {0, 0, 0};
    double r2 = 0.0;
    for (std::size_t a = kdim; a-- > 0;) {
      u[a] = -1.0 + (static_cast<double>(rest % n) + 0.5) * h;
      rest /= n;
      r2 += u[a] * u[a];
    }
    if (r2 >= 1.0) continue;
    const double k = std::exp(1.0 / (r2 - 1.0));
    for (std::size_t a = 0; a < dim; ++a) offsets_.push_back(a < kdim ? u[a] * eps : 0.0);
    raw.push_back(k);
    sum.add(k);
  }
  const double total_mass = sum.value();
  weights_.reserve(raw.size());
  for (double k : raw) weights_.push_back(k / total_mass);
}

double Mollifier::kernel(const double* z) const {
  const std::size_t kdim = variant_ == Variant::TimeOnly ? 1 : dim_;
  double r2 = 0.0;
  for (std::size_t a = 0; a < kdim; ++a) r2 += (z[a] / eps_) * (z[a] / eps_);
  if (r2 >= 1.0) return 0.0;
  return normalization(kdim) * std::exp(1.0 / (r2 - 1.0)) / std::pow(eps_, static_cast<double>(kdim));
}

// ---------------------------------------------------------------------------
// Working grid

std::size_t WorkingGrid::size() const {
  std::size_t n = 1;
  for (const auto& c : centers) n *= c.size();
  return n;
}

std::vector<std::size_t> WorkingGrid::index(std::size_t flat) const {
  std::vector<std::size_t> idx(dim());
  for (std::size_t a = dim(); a-- > 0;) {
    idx[a] = flat % centers[a].size();
    flat /= centers[a].size();
  }
  return idx;
}

void WorkingGrid::node(std::size_t flat, double* p) const {
  for (std::size_t a = dim(); a-- > 0;) {
    p[a] = centers[a][flat % centers[a].size()];
    flat /= centers[a].size();
  }
}

double WorkingGrid::volume(std::size_t flat) const {
  double v = 1.0;
  for (std::size_t a = dim(); a-- > 0;) {
    v *= widths[a][flat % centers[a].size()];
    flat /= centers[a].size();
  }
  return v;
}

WorkingGrid build_working_grid(const PartitionOfUnity& partition,
                               const SmoothingOptions& options) {
  if (options.cells_per_ramp < 1) throw DomainError("cells_per_ramp must be positive");
  if (!(options.h_max > 0.0)) throw DomainError("h_max must be positive");
  const auto& q = partition.cover().domain();
  const double r = partition.reach();
  const double kappa = partition.fraction() / options.cells_per_ramp;
  WorkingGrid grid;
  for (std::size_t a = 0; a < q.dim(); ++a) {
    const double lo = q.axis(a).lo;
    const double hi = q.axis(a).hi;
    const double mid = 0.5 * (lo + hi);
    const double start = lo + r;
    if (!(start < mid)) throw DomainError("covered region is empty on an axis");
    std::vector<double> half;
    double x = start;
    while (x < mid) {
      const double y = x - lo;
      const double w = std::min(options.h_max, kappa * y * y);
      half.push_back(w);
      x += w;
    }
    double total = 0.0;
    for (double w : half) total += w;
    const double scale = (mid - start) / total;
    for (double& w : half) w *= scale;
    std::vector<double> widths = half;
    widths.insert(widths.end(), half.rbegin(), half.rend());
    std::vector<double> centers;
    double left = start;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      if (i < half.size()) {
        centers.push_back(left + 0.5 * widths[i]);
        left += widths[i];
      } else {
        // Mirror image keeps the grid exactly symmetric.
        centers.push_back(lo + hi - centers[widths.size() - 1 - i]);
      }
    }
    grid.centers.push_back(std::move(centers));
    grid.widths.push_back(std::move(widths));
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Convolution kernel sums

namespace {

struct Conv {
  double b[4] = {0, 0, 0, 0};
  double db[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  double phi = 0.0;
};

struct Problem {
  const Field* b = nullptr;
  const Field* db = nullptr;
  const PartitionOfUnity* part = nullptr;
  const NFunction* phi = nullptr;
  std::size_t dim = 0;
  std::size_t off = 0;
  std::size_t m = 1;
  std::size_t n = 1;
};

// (rho_eps * b_j)(p), and optionally rho * Db_j and rho * phi(|Db_j|), with
// b_j = psi_j b extended by zero.
void convolve(const Problem& pr, int j, const Mollifier& mol, const double* p, Conv& out,
              bool want_db) {
  const std::size_t dim = pr.dim;
  const std::size_t m = pr.m;
  const std::size_t mn = pr.m * pr.n;
  const double eps = mol.radius();
  const auto& part = *pr.part;
  const bool inside = part.cover().dist(p) - eps >= part.psi_one_dist(j) &&
                      part.cover().ell(p) + 2.0 * eps <= part.psi_one_ell(j);
  out = Conv{};
  double q[3];
  double bq[4];
  double dbq[8];
  double pg[3];
  for (std::size_t k = 0; k < mol.size(); ++k) {
    const double* z = mol.offset(k);
    for (std::size_t a = 0; a < dim; ++a) q[a] = p[a] - z[a];
    const double w = mol.weight(k);
    if (inside) {
      pr.b->eval(q, bq);
      if (want_db) pr.db->eval(q, dbq);
    } else {
      const double psi = part.psi(j, q, want_db ? pg : nullptr);
      if (psi == 0.0) continue;
      pr.b->eval(q, bq);
      if (want_db) {
        pr.db->eval(q, dbq);
        for (std::size_t r = 0; r < m; ++r) {
          for (std::size_t c = 0; c < pr.n; ++c) {
            dbq[r * pr.n + c] = psi * dbq[r * pr.n + c] + bq[r] * pg[pr.off + c];
          }
        }
      }
      for (std::size_t r = 0; r < m; ++r) bq[r] *= psi;
    }
    for (std::size_t r = 0; r < m; ++r) out.b[r] += w * bq[r];
    if (want_db) {
      for (std::size_t i = 0; i < mn; ++i) out.db[i] += w * dbq[i];
      out.phi += w * (*pr.phi)(frob(dbq, mn));
    }
  }
}

double spatial_norm(const double* grad, std::size_t off, std::size_t n) {
  double s = 0.0;
  for (std::size_t c = 0; c < n; ++c) s += grad[off + c] * grad[off + c];
  return std::sqrt(s);
}

struct NodeData {
  std::vector<double> b;    // m per node
  std::vector<double> db;   // m*n per node
  std::vector<double> w;
  std::vector<double> phi;  // phi(|Db|)
};

struct RingNodes {
  int j = 0;
  std::vector<std::size_t> nodes;
  std::vector<double> zeta;
  std::vector<double> grad;  // dim per node
};

Problem make_problem(const Field& b, const Field& db, const PartitionOfUnity& part,
                     const NFunction& phi) {
  Problem pr;
  pr.b = &b;
  pr.db = &db;
  pr.part = &part;
  pr.phi = &phi;
  pr.dim = b.domain().dim();
  pr.off = b.domain().spatial_offset();
  pr.m = b.arity().size();
  pr.n = b.domain().spatial_dim();
  if (pr.m > 2) throw DomainError("smoothing supports at most 2 components");
  if (pr.m * pr.n > 8) throw DomainError("gradient too large");
  return pr;
}

struct BudgetValues {
  double a = 0, b = 0, c_l1 = 0, c_sup = 0, d = 0;
};

// Budgets over the listed ring-local indices; conv results stored when
// requested.
BudgetValues evaluate_budgets(const Problem& pr, const RingNodes& ring,
                              const std::vector<std::size_t>& local, const WorkingGrid& grid,
                              const NodeData& nd, const Mollifier& mol, RingCache* cache) {
  const std::size_t m = pr.m;
  const std::size_t mn = pr.m * pr.n;
  const std::size_t count = local.size();
  std::vector<double> qa(count), qb(count), qc(count), qd(count);
  std::vector<Conv> convs(cache ? count : 0);
  bool saturated = false;
  std::vector<char> sat(count, 0);
  numerics::parallel_for(count, [&](std::size_t i) {
    const std::size_t li = local[i];
    const std::size_t node = ring.nodes[li];
    double p[3];
    grid.node(node, p);
    Conv cv;
    try {
      convolve(pr, ring.j, mol, p, cv, true);
    } catch (const SaturationError&) {
      sat[i] = 1;
      return;
    }
    double diff[4];
    for (std::size_t r = 0; r < m; ++r) diff[r] = cv.b[r] - nd.b[node * m + r];
    double ddiff[8];
    for (std::size_t k = 0; k < mn; ++k) ddiff[k] = cv.db[k] - nd.db[node * mn + k];
    const double vol = grid.volume(node);
    const double zeta = ring.zeta[li];
    const double ea = frob(diff, m);
    qa[i] = vol * zeta * ea;
    qb[i] = vol * zeta * frob(ddiff, mn);
    qc[i] = spatial_norm(&ring.grad[li * pr.dim], pr.off, pr.n) * ea;
    qd[i] = vol * std::abs(cv.phi - nd.phi[node]);
    if (cache) convs[i] = cv;
  });
  for (char s : sat) saturated = saturated || s;
  BudgetValues out;
  if (saturated) {
    out.a = out.b = out.c_l1 = out.c_sup = out.d = kInf;
    return out;
  }
  numerics::CompensatedSum sa, sb, sc, sd;
  for (std::size_t i = 0; i < count; ++i) {
    const double vol = grid.volume(ring.nodes[local[i]]);
    sa.add(qa[i]);
    sb.add(qb[i]);
    sc.add(vol * qc[i]);
    sd.add(qd[i]);
    out.c_sup = std::max(out.c_sup, qc[i]);
  }
  out.a = sa.value();
  out.b = sb.value();
  out.c_l1 = sc.value();
  out.d = sd.value();
  if (cache) {
    cache->j = ring.j;
    cache->nodes = ring.nodes;
    cache->zeta = ring.zeta;
    cache->grad = ring.grad;
    cache->conv_b.resize(count * m);
    cache->conv_db.resize(count * mn);
    cache->conv_phi.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::copy_n(convs[i].b, m, &cache->conv_b[i * m]);
      std::copy_n(convs[i].db, mn, &cache->conv_db[i * mn]);
      cache->conv_phi[i] = convs[i].phi;
    }
  }
  return out;
}

// Sup of |grad_x zeta_j| |rho * b_j - b| over refined points inside the
// ramp cells of ring j.
double audit_sup(const Problem& pr, const RingNodes& ring, const WorkingGrid& grid,
                 const Mollifier& mol, int refine) {
  const std::size_t dim = pr.dim;
  std::vector<std::size_t> ramp;
  for (std::size_t li = 0; li < ring.nodes.size(); ++li) {
    if (spatial_norm(&ring.grad[li * dim], pr.off, pr.n) > 0.0) ramp.push_back(li);
  }
  std::size_t sub = 1;
  for (std::size_t a = 0; a < dim; ++a) sub *= static_cast<std::size_t>(refine);
  std::vector<double> best(ramp.size(), 0.0);
  numerics::parallel_for(ramp.size(), [&](std::size_t i) {
    const std::size_t node = ring.nodes[ramp[i]];
    const auto idx = grid.index(node);
    double p[3];
    double bp[4];
    PartitionOfUnity::Active act[8];
    for (std::size_t s = 0; s < sub; ++s) {
      std::size_t rest = s;
      for (std::size_t a = dim; a-- > 0;) {
        const auto k = static_cast<double>(rest % static_cast<std::size_t>(refine));
        rest /= static_cast<std::size_t>(refine);
        const double w = grid.widths[a][idx[a]];
        p[a] = grid.centers[a][idx[a]] - 0.5 * w + (k + 0.5) * w / refine;
      }
      const int na = pr.part->evaluate(p, act);
      const PartitionOfUnity::Active* mine = nullptr;
      for (int t = 0; t < na; ++t) {
        if (act[t].j == ring.j) mine = &act[t];
      }
      if (!mine) continue;
      const double gnorm = spatial_norm(mine->grad, pr.off, pr.n);
      if (gnorm == 0.0) continue;
      Conv cv;
      convolve(pr, ring.j, mol, p, cv, false);
      pr.b->eval(p, bp);
      double diff[4];
      for (std::size_t r = 0; r < pr.m; ++r) diff[r] = cv.b[r] - bp[r];
      best[i] = std::max(best[i], gnorm * frob(diff, pr.m));
    }
  });
  double out = 0.0;
  for (double v : best) out = std::max(out, v);
  return out;
}

}  // namespace

bool BudgetEntry::satisfied() const {
  return a < a_cap && b < b_cap && c_l1 < c_cap && c_sup < c_cap && c_sup_audit < c_cap &&
         d < d_cap;
}

double SmoothingPlan::eps(int j) const {
  for (const auto& e : ledger) {
    if (e.j == j) return e.eps;
  }
  throw std::out_of_range("ring " + std::to_string(j) + " has no radius");
}

nlohmann::json SmoothingPlan::to_json() const {
  nlohmann::json rings = nlohmann::json::array();
  for (const auto& e : ledger) {
    rings.push_back({{"j", e.j},
                     {"eps", e.eps},
                     {"halvings", e.halvings},
                     {"M", e.m},
                     {"nodes", e.nodes},
                     {"satisfied", e.satisfied()},
                     {"budgets",
                      {{"a", {{"value", e.a}, {"cap", e.a_cap}}},
                       {"b", {{"value", e.b}, {"cap", e.b_cap}}},
                       {"c_l1", {{"value", e.c_l1}, {"cap", e.c_cap}}},
                       {"c_sup", {{"value", e.c_sup}, {"cap", e.c_cap}}},
                       {"c_sup_audit", {{"value", e.c_sup_audit}, {"cap", e.c_cap}}},
                       {"d", {{"value", e.d}, {"cap", e.d_cap}}}}}});
  }
  nlohmann::json grid_shape = nlohmann::json::array();
  if (grid) {
    for (const auto& c : grid->centers) grid_shape.push_back(c.size());
  }
  return {{"delta", delta},
          {"phi", phi.to_string()},
          {"domain", io::to_json(q)},
          {"j_max", options.j_max},
          {"fraction", options.fraction},
          {"kernel_cells", options.kernel_cells},
          {"cells_per_ramp", options.cells_per_ramp},
          {"audit_refine", options.audit_refine},
          {"reach", partition ? partition->reach() : 0.0},
          {"working_grid", grid_shape},
          {"rings", rings},
          {"skipped", skipped}};
}

SmoothingPlan choose_radii(const Field& b, const NFunction& phi, const Weight& w,
                           double delta, const SmoothingOptions& options) {
  const auto cover = build_cover(b.domain(), options.j_max);
  const PartitionOfUnity part(cover, options.fraction);
  return choose_radii(b, phi, w, part, delta, options);
}

SmoothingPlan choose_radii(const Field& b, const NFunction& phi, const Weight& w,
                           const PartitionOfUnity& partition, double delta,
                           const SmoothingOptions& options_in) {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw DomainError("delta must be positive");
  if (b.domain().kind() != DomainKind::SpaceTimeBox) {
    throw DomainError("smoothing needs a space-time box");
  }
  if (!(partition.cover().domain() == b.domain())) {
    throw DomainError("partition and field live on different domains");
  }
  if (!(w.field().domain() == b.domain())) throw DomainError("weight domain mismatch");
  SmoothingOptions options = options_in;
  options.j_max = partition.cover().j_max();
  options.fraction = partition.fraction();

  const Field db = finite_diff_gradient(b);
  const Problem pr = make_problem(b, db, partition, phi);
  auto grid = std::make_shared<WorkingGrid>(build_working_grid(partition, options));
  const std::size_t total = grid->size();
  const std::size_t m = pr.m;
  const std::size_t mn = pr.m * pr.n;
  const std::size_t dim = pr.dim;

  NodeData nd;
  nd.b.resize(total * m);
  nd.db.resize(total * mn);
  nd.w.resize(total);
  nd.phi.resize(total);
  std::vector<std::vector<PartitionOfUnity::Active>> actives(total);
  numerics::parallel_for(total, [&](std::size_t i) {
    double p[3];
    grid->node(i, p);
    b.eval(p, &nd.b[i * m]);
    db.eval(p, &nd.db[i * mn]);
    nd.w[i] = w(p);
    nd.phi[i] = phi(frob(&nd.db[i * mn], mn));
    PartitionOfUnity::Active act[8];
    const int na = partition.evaluate(p, act);
    actives[i].assign(act, act + na);
  });

  std::map<int, RingNodes> rings;
  for (std::size_t i = 0; i < total; ++i) {
    for (const auto& a : actives[i]) {
      auto& r = rings[a.j];
      r.j = a.j;
      r.nodes.push_back(i);
      r.zeta.push_back(a.zeta);
      r.grad.insert(r.grad.end(), a.grad, a.grad + dim);
    }
  }

  SmoothingPlan plan;
  plan.q = b.domain();
  plan.partition = std::make_shared<const PartitionOfUnity>(partition);
  plan.phi = phi;
  plan.delta = delta;
  plan.options = options;
  plan.grid = grid;
  auto caches = std::make_shared<std::vector<RingCache>>();

  const int stride = std::max(1, options.predict_stride);
  for (int j : partition.cover().rings()) {
    const auto it = rings.find(j);
    if (it == rings.end()) {
      plan.skipped.push_back(j);
      continue;
    }
    const RingNodes& ring = it->second;
    BudgetEntry e;
    e.j = j;
    e.nodes = ring.nodes.size();
    double wmax = 0.0;
    double p[3];
    for (std::size_t node : ring.nodes) {
      grid->node(node, p);
      if (partition.cover().in_ring(j, p)) wmax = std::max(wmax, nd.w[node]);
    }
    e.m = std::max(1.0, wmax);
    const double two_j = std::ldexp(1.0, j);
    e.a_cap = delta / two_j;
    e.b_cap = delta / (2.0 * two_j);
    e.c_cap = delta / (2.0 * two_j * e.m);
    e.d_cap = delta / (two_j * e.m);

    std::vector<std::size_t> all(ring.nodes.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    std::vector<std::size_t> coarse;
    double vol_all = 0.0;
    double vol_coarse = 0.0;
    for (std::size_t li = 0; li < ring.nodes.size(); ++li) {
      const auto idx = grid->index(ring.nodes[li]);
      const double v = grid->volume(ring.nodes[li]);
      vol_all += v;
      bool keep = true;
      for (auto k : idx) keep = keep && (k % static_cast<std::size_t>(stride) == 0);
      if (keep) {
        coarse.push_back(li);
        vol_coarse += v;
      }
    }

    const double floor_eps = options.floor_factor * delta;
    double eps = 0.5 * delta;
    std::string last_failed = "a";
    bool done = false;
    while (!done) {
      if (eps < floor_eps) {
        throw PlanFailure(j, last_failed,
                          "ring j=" + std::to_string(j) + ": budget (" + last_failed +
                              ") unmet at the floor radius " + io::format_double(floor_eps));
      }
      const Mollifier mol(eps, dim, Mollifier::Variant::SpaceTime, options.kernel_cells);
      if (stride > 1 && !coarse.empty() && coarse.size() < all.size()) {
        const auto est = evaluate_budgets(pr, ring, coarse, *grid, nd, mol, nullptr);
        const double scale = vol_all / vol_coarse;
        std::string fail;
        if (est.c_sup >= e.c_cap) fail = "c_sup";
        else if (est.a * scale >= 1.5 * e.a_cap) fail = "a";
        else if (est.b * scale >= 1.5 * e.b_cap) fail = "b";
        else if (est.c_l1 * scale >= 1.5 * e.c_cap) fail = "c_l1";
        else if (est.d * scale >= 1.5 * e.d_cap) fail = "d";
        if (!fail.empty()) {
          last_failed = fail;
          eps *= 0.5;
          ++e.halvings;
          continue;
        }
      }
      RingCache cache;
      const auto full = evaluate_budgets(pr, ring, all, *grid, nd, mol, &cache);
      e.eps = eps;
      e.a = full.a;
      e.b = full.b;
      e.c_l1 = full.c_l1;
      e.c_sup = full.c_sup;
      e.d = full.d;
      e.c_sup_audit = 0.0;
      std::string fail;
      if (!(e.a < e.a_cap)) fail = "a";
      else if (!(e.b < e.b_cap)) fail = "b";
      else if (!(e.c_l1 < e.c_cap)) fail = "c_l1";
      else if (!(e.c_sup < e.c_cap)) fail = "c_sup";
      else if (!(e.d < e.d_cap)) fail = "d";
      if (fail.empty()) {
        e.c_sup_audit = audit_sup(pr, ring, *grid, mol, options.audit_refine);
        if (!(e.c_sup_audit < e.c_cap)) fail = "c_sup_audit";
      }
      if (fail.empty()) {
        caches->push_back(std::move(cache));
        plan.ledger.push_back(e);
        done = true;
      } else {
        last_failed = fail;
        eps *= 0.5;
        ++e.halvings;
      }
    }
  }
  plan.cache = caches;
  return plan;
}

// ---------------------------------------------------------------------------
// Smoothed field

SmoothedField::SmoothedField(Field b, SmoothingPlan plan)
    : b_(std::move(b)), plan_(std::move(plan)) {
  if (!plan_.partition) throw DomainError("plan has no partition");
  if (!(b_.domain() == plan_.q)) throw DomainError("plan was built for another domain");
  db_ = finite_diff_gradient(b_);
}

SmoothedField smooth(const Field& b, const SmoothingPlan& plan) {
  return SmoothedField(b, plan);
}

void SmoothedField::evaluate(const double* p, Parts& out) const {
  const auto& part = *plan_.partition;
  const Problem pr = make_problem(b_, db_, part, plan_.phi);
  const std::size_t m = pr.m;
  const std::size_t mn = pr.m * pr.n;
  out.b.assign(m, 0.0);
  out.db.assign(mn, 0.0);
  out.v.assign(mn, 0.0);
  out.z.assign(mn, 0.0);
  out.g = 0.0;
  if (!part.cover().domain().contains(std::span<const double>(p, pr.dim))) {
    throw DomainError("evaluation point outside Q");
  }
  PartitionOfUnity::Active act[8];
  const int na = part.evaluate(p, act);
  double bp[4];
  b_.eval(p, bp);
  for (int i = 0; i < na; ++i) {
    const auto& a = act[i];
    const Mollifier mol(plan_.eps(a.j), pr.dim, Mollifier::Variant::SpaceTime,
                        plan_.options.kernel_cells);
    Conv cv;
    convolve(pr, a.j, mol, p, cv, true);
    for (std::size_t r = 0; r < m; ++r) {
      out.b[r] += a.zeta * cv.b[r];
      for (std::size_t c = 0; c < pr.n; ++c) {
        out.z[r * pr.n + c] += a.grad[pr.off + c] * (cv.b[r] - bp[r]);
      }
    }
    for (std::size_t k = 0; k < mn; ++k) out.v[k] += a.zeta * cv.db[k];
    out.g += a.zeta * cv.phi;
  }
  for (std::size_t k = 0; k < mn; ++k) out.db[k] = out.v[k] + out.z[k];
}

Field SmoothedField::field() const {
  const Domain box = plan_.partition->covered_box();
  const auto self = std::make_shared<const SmoothedField>(*this);
  const std::size_t m = components();
  const std::size_t mn = m * spatial_dim();
  Field f = Field::analytic(
      box, b_.arity(),
      [self, m](const double* p, double* out) {
        Parts parts;
        self->evaluate(p, parts);
        std::copy_n(parts.b.data(), m, out);
      },
      b_.name() + "_smoothed");
  Field g = Field::analytic(
      box, Arity{static_cast<int>(m), static_cast<int>(spatial_dim())},
      [self, mn](const double* p, double* out) {
        Parts parts;
        self->evaluate(p, parts);
        std::copy_n(parts.db.data(), mn, out);
      },
      b_.name() + "_smoothed_gradient");
  return f.with_gradient(g);
}

// ---------------------------------------------------------------------------
// Snapshots and energy checks

PlanSnapshot snapshot(const Field& b, const Weight& w, const SmoothingPlan& plan) {
  if (!plan.grid || !plan.cache) throw DomainError("plan has no working-grid cache");
  const Field db = finite_diff_gradient(b);
  const auto& grid = *plan.grid;
  PlanSnapshot s;
  s.m = b.arity().size();
  s.n = b.domain().spatial_dim();
  const std::size_t off = b.domain().spatial_offset();
  const std::size_t dim = b.domain().dim();
  const std::size_t total = grid.size();
  const std::size_t m = s.m;
  const std::size_t mn = s.m * s.n;
  s.volume.resize(total);
  s.b.resize(total * m);
  s.db.resize(total * mn);
  s.w.resize(total);
  numerics::parallel_for(total, [&](std::size_t i) {
    double p[3];
    grid.node(i, p);
    s.volume[i] = grid.volume(i);
    b.eval(p, &s.b[i * m]);
    db.eval(p, &s.db[i * mn]);
    s.w[i] = w(p);
  });
  s.b_delta.assign(total * m, 0.0);
  s.v.assign(total * mn, 0.0);
  s.z.assign(total * mn, 0.0);
  s.g.assign(total, 0.0);
  for (const auto& ring : *plan.cache) {
    for (std::size_t li = 0; li < ring.nodes.size(); ++li) {
      const std::size_t node = ring.nodes[li];
      const double zeta = ring.zeta[li];
      const double* grad = &ring.grad[li * dim];
      for (std::size_t r = 0; r < m; ++r) {
        const double cb = ring.conv_b[li * m + r];
        s.b_delta[node * m + r] += zeta * cb;
        for (std::size_t c = 0; c < s.n; ++c) {
          s.z[node * mn + r * s.n + c] += grad[off + c] * (cb - s.b[node * m + r]);
        }
      }
      for (std::size_t k = 0; k < mn; ++k) s.v[node * mn + k] += zeta * ring.conv_db[li * mn + k];
      s.g[node] += zeta * ring.conv_phi[li];
    }
  }
  s.db_delta.resize(total * mn);
  for (std::size_t k = 0; k < total * mn; ++k) s.db_delta[k] = s.v[k] + s.z[k];
  return s;
}

double PlanSnapshot::db_l1() const {
  const std::size_t mn = m * n;
  numerics::CompensatedSum sum;
  std::vector<double> d(mn);
  for (std::size_t i = 0; i < volume.size(); ++i) {
    for (std::size_t k = 0; k < mn; ++k) d[k] = db_delta[i * mn + k] - db[i * mn + k];
    sum.add(volume[i] * frob(d.data(), mn));
  }
  return sum.value();
}

double PlanSnapshot::z_sup() const {
  const std::size_t mn = m * n;
  double out = 0.0;
  for (std::size_t i = 0; i < volume.size(); ++i) out = std::max(out, frob(&z[i * mn], mn));
  return out;
}

double PlanSnapshot::energy(const NFunction& phi, bool smoothed) const {
  const std::size_t mn = m * n;
  const auto& src = smoothed ? db_delta : db;
  numerics::CompensatedSum sum;
  try {
    for (std::size_t i = 0; i < volume.size(); ++i) {
      sum.add(volume[i] * w[i] * phi(frob(&src[i * mn], mn)));
    }
  } catch (const SaturationError&) {
    return kInf;
  }
  return sum.value();
}

double PlanSnapshot::energy_l1(const NFunction& phi) const {
  const std::size_t mn = m * n;
  numerics::CompensatedSum sum;
  try {
    for (std::size_t i = 0; i < volume.size(); ++i) {
      const double a = phi(frob(&db_delta[i * mn], mn));
      const double b0 = phi(frob(&db[i * mn], mn));
      sum.add(volume[i] * w[i] * std::abs(a - b0));
    }
  } catch (const SaturationError&) {
    return kInf;
  }
  return sum.value();
}

double PlanSnapshot::gradient_modular(const NFunction& phi, double lambda) const {
  const std::size_t mn = m * n;
  numerics::CompensatedSum sum;
  std::vector<double> d(mn);
  try {
    for (std::size_t i = 0; i < volume.size(); ++i) {
      for (std::size_t k = 0; k < mn; ++k) d[k] = db_delta[i * mn + k] - db[i * mn + k];
      sum.add(volume[i] * phi(frob(d.data(), mn) / lambda));
    }
  } catch (const SaturationError&) {
    return kInf;
  }
  return sum.value();
}

double PlanSnapshot::value_modular(const NFunction& phi) const {
  numerics::CompensatedSum sum;
  std::vector<double> d(m);
  try {
    for (std::size_t i = 0; i < volume.size(); ++i) {
      for (std::size_t k = 0; k < m; ++k) d[k] = b_delta[i * m + k] - b[i * m + k];
      sum.add(volume[i] * phi(frob(d.data(), m)));
    }
  } catch (const SaturationError&) {
    return kInf;
  }
  return sum.value();
}

double PlanSnapshot::value_norm(const NFunction& phi, double tol) const {
  std::vector<double> mags(volume.size());
  std::vector<double> d(m);
  bool all_zero = true;
  for (std::size_t i = 0; i < volume.size(); ++i) {
    for (std::size_t k = 0; k < m; ++k) d[k] = b_delta[i * m + k] - b[i * m + k];
    mags[i] = frob(d.data(), m);
    all_zero = all_zero && mags[i] == 0.0;
  }
  if (all_zero) return 0.0;
  // N(u / lambda) - 1, saturation counted as +inf.
  auto excess = [&](double lambda) {
    numerics::CompensatedSum sum;
    try {
      for (std::size_t i = 0; i < mags.size(); ++i) sum.add(volume[i] * phi(mags[i] / lambda));
    } catch (const SaturationError&) {
      return kInf;
    }
    return sum.value() - 1.0;
  };
  // excess is nonincreasing in lambda, so nondecreasing in 1/lambda.
  double lo = 1.0;
  double hi = 1.0;
  int steps = 0;
  if (excess(1.0) > 0.0) {
    while (excess(hi) > 0.0) {
      hi *= 2.0;
      if (++steps > 60) return kInf;
    }
    lo = hi / 2.0;
  } else {
    while (excess(lo) <= 0.0) {
      lo /= 2.0;
      if (++steps > 60) return lo;
    }
    hi = lo * 2.0;
  }
  const double inv = numerics::bisect_increasing(
      [&](double r) { return excess(1.0 / r); }, 1.0 / hi, 1.0 / lo, tol / hi);
  return 1.0 / inv;
}

EnergyConvergence verify_energy_convergence(const Field& b, const NFunction& phi,
                                            const Weight& w,
                                            const std::vector<double>& delta_ladder,
                                            const SmoothingOptions& options, double rel_tol) {
  if (delta_ladder.empty()) throw DomainError("delta ladder is empty");
  for (std::size_t i = 1; i < delta_ladder.size(); ++i) {
    if (!(delta_ladder[i] < delta_ladder[i - 1])) {
      throw DomainError("delta ladder must be strictly decreasing");
    }
  }
  const auto cover = build_cover(b.domain(), options.j_max);
  const PartitionOfUnity part(cover, options.fraction);
  EnergyConvergence out;
  std::vector<double> energy_l1, gap, db_l1, z_sup, energy_smoothed;
  for (double delta : delta_ladder) {
    auto plan = choose_radii(b, phi, w, part, delta, options);
    auto snap = snapshot(b, w, plan);
    out.reference_energy = snap.energy(phi, false);
    const double e = snap.energy(phi, true);
    energy_smoothed.push_back(e);
    energy_l1.push_back(snap.energy_l1(phi));
    gap.push_back(std::abs(e - out.reference_energy));
    db_l1.push_back(snap.db_l1());
    z_sup.push_back(snap.z_sup());
    out.plans.push_back(std::move(plan));
    out.snapshots.push_back(std::move(snap));
  }
  const double tol = rel_tol * out.reference_energy;
  ConvergenceReport report("delta", delta_ladder, tol);
  report.set_column("energy_l1", energy_l1);
  report.set_column("energy_gap", gap);
  report.set_column("energy_smoothed", energy_smoothed);
  report.set_column("db_l1", db_l1);
  report.set_column("z_sup", z_sup);
  bool db_bound = true;
  bool z_bound = true;
  for (std::size_t i = 0; i < delta_ladder.size(); ++i) {
    db_bound = db_bound && db_l1[i] <= delta_ladder[i];
    z_bound = z_bound && z_sup[i] < 0.5 * delta_ladder[i];
  }
  const bool zero_ref = out.reference_energy == 0.0;
  auto trend = [&](const std::vector<double>& v) {
    if (zero_ref) return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
    return decreasing_below(v, tol);
  };
  report.set_flag("energy", trend(gap));
  report.set_flag("energy_l1", trend(energy_l1));
  report.set_flag("db_l1_bound", db_bound);
  report.set_flag("z_sup_bound", z_bound);
  report.set_note("reference_energy", out.reference_energy);
  report.set_note("phi", phi.to_string());
  report.set_note("region", "covered box, dist >= " + io::format_double(part.reach()));
  out.report = std::move(report);
  return out;
}

// ---------------------------------------------------------------------------
// Time mollification

Field time_mollify(const Field& b, double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw DomainError("eps must be positive");
  const auto& d = b.domain();
  if (d.kind() != DomainKind::SpaceTimeBox) throw DomainError("time mollification needs a space-time box");
  const double lo = d.axis(0).lo;
  const double hi = d.axis(0).hi;
  const double len = hi - lo;
  const double nodes = std::ceil(8.0 * len / eps);
  const double h = len / nodes;
  const std::size_t m = b.arity().size();
  const std::size_t dim = d.dim();
  const Field db = finite_diff_gradient(b);
  const std::size_t mn = db.arity().size();

  // Applies the normalized time weights to f(s_k, x) for nodes inside I.
  auto make = [lo, hi, h, eps, dim](Field f, std::size_t comps) {
    return [f = std::move(f), comps, lo, hi, h, eps, dim](const double* p, double* out) {
      const double t = p[0];
      const auto k0 = static_cast<long long>(std::ceil((t - eps - lo) / h - 0.5));
      const auto k1 = static_cast<long long>(std::floor((t + eps - lo) / h - 0.5));
      std::fill_n(out, comps, 0.0);
      double total = 0.0;
      double q[3];
      std::copy_n(p, dim, q);
      std::vector<double> buf(comps);
      for (long long k = k0; k <= k1; ++k) {
        const double s = lo + (static_cast<double>(k) + 0.5) * h;
        const double u = (t - s) / eps;
        if (!(u * u < 1.0)) continue;
        const double wk = std::exp(1.0 / (u * u - 1.0));
        total += wk;
        if (!(s > lo && s < hi)) continue;
        q[0] = s;
        f.eval(q, buf.data());
        for (std::size_t c = 0; c < comps; ++c) out[c] += wk * buf[c];
      }
      for (std::size_t c = 0; c < comps; ++c) out[c] /= total;
    };
  };
  Field g = Field::analytic(d, db.arity(), make(db, mn), b.name() + "_time_mollified_gradient");
  return Field::analytic(d, b.arity(), make(b, m), b.name() + "_time_mollified").with_gradient(g);
}

// ---------------------------------------------------------------------------
// Verification

VerificationReport check_jensen_step(const SmoothedField& s, std::size_t points,
                                     std::uint32_t seed) {
  const Domain box = s.plan().partition->covered_box();
  std::mt19937 rng(seed);
  std::vector<std::uniform_real_distribution<double>> dist;
  for (const auto& a : box.axes()) dist.emplace_back(a.lo, a.hi);
  VerificationReport r;
  r.name = "jensen_step";
  const std::size_t mn = s.components() * s.spatial_dim();
  std::vector<std::array<double, 3>> pts(points);
  for (auto& p : pts) {
    for (std::size_t a = 0; a < box.dim(); ++a) p[a] = dist[a](rng);
  }
  std::vector<double> excess(points);
  std::vector<char> sat(points, 0);
  numerics::parallel_for(points, [&](std::size_t i) {
    SmoothedField::Parts parts;
    s.evaluate(pts[i].data(), parts);
    try {
      excess[i] = s.plan().phi(frob(parts.v.data(), mn)) - parts.g;
    } catch (const SaturationError&) {
      sat[i] = 1;
    }
  });
  for (std::size_t i = 0; i < points; ++i) {
    ++r.samples;
    if (sat[i]) {
      ++r.violations;
      continue;
    }
    if (excess[i] > r.max_excess) {
      r.max_excess = excess[i];
      r.worst = {pts[i][0], pts[i][1]};
    }
    if (excess[i] > 1e-10) ++r.violations;
  }
  r.passed = r.violations == 0;
  r.detail = std::to_string(r.violations) + " violations over " + std::to_string(r.samples) +
             " points; max phi(|v|) - G = " + io::format_double(r.max_excess);
  return r;
}

VerificationReport check_jensen_step(const Field& b, const SmoothingPlan& plan,
                                     const NFunction& phi, std::size_t points,
                                     std::uint32_t seed) {
  SmoothingPlan p = plan;
  p.phi = phi;
  return check_jensen_step(SmoothedField(b, std::move(p)), points, seed);
}

VerificationReport check_domination(const PlanSnapshot& snap, const NFunction& phi,
                                    double k) {
  const std::size_t mn = snap.m * snap.n;
  const std::size_t total = snap.volume.size();
  std::vector<double> sigma(total);
  double sigma_sup = 0.0;
  for (std::size_t i = 0; i < total; ++i) {
    sigma[i] = phi(frob(&snap.z[i * mn], mn));
    sigma_sup = std::max(sigma_sup, sigma[i]);
  }
  VerificationReport r;
  r.name = "domination";
  for (std::size_t i = 0; i < total; ++i) {
    ++r.samples;
    const double lhs = snap.w[i] * phi(frob(&snap.db_delta[i * mn], mn));
    const double rhs = k * ((1.0 + sigma_sup) * snap.w[i] * snap.g[i] + snap.w[i] * sigma[i]);
    const double excess = lhs - rhs;
    if (excess > r.max_excess) {
      r.max_excess = excess;
      r.worst = {static_cast<double>(i), rhs};
    }
    if (excess > 1e-12 * (1.0 + std::abs(rhs))) ++r.violations;
  }
  r.passed = r.violations == 0;
  r.detail = std::to_string(r.violations) + " violations over " + std::to_string(r.samples) +
             " nodes; sup sigma = " + io::format_double(sigma_sup);
  return r;
}

ConvergenceReport diagonal_energy_ladder(const Field& b, const NFunction& phi,
                                         const Weight& w,
                                         const std::vector<double>& eps_ladder,
                                         const std::vector<double>& delta_ladder,
                                         const SmoothingOptions& options) {
  if (eps_ladder.size() != delta_ladder.size() || eps_ladder.empty()) {
    throw DomainError("eps and delta ladders must be nonempty and of equal length");
  }
  const auto cover = build_cover(b.domain(), options.j_max);
  const PartitionOfUnity part(cover, options.fraction);
  std::vector<double> mollified, smoothed, gap, index;
  double reference = 0.0;
  for (std::size_t k = 0; k < eps_ladder.size(); ++k) {
    const Field be = time_mollify(b, eps_ladder[k]);
    const auto plan = choose_radii(be, phi, w, part, delta_ladder[k], options);
    const auto snap_e = snapshot(be, w, plan);
    const auto base = snapshot(b, w, plan);
    reference = base.energy(phi, false);
    mollified.push_back(snap_e.energy(phi, false));
    smoothed.push_back(snap_e.energy(phi, true));
    gap.push_back(std::abs(smoothed.back() - reference));
    index.push_back(static_cast<double>(k + 1));
  }
  ConvergenceReport report("k", index, 0.0);
  report.set_column("eps", eps_ladder);
  report.set_column("delta", delta_ladder);
  report.set_column("energy_time_mollified", mollified);
  report.set_column("energy_smoothed", smoothed);
  report.set_column("energy_gap", gap);
  report.set_note("reference_energy", reference);
  report.set_note("pairing", "k-th eps with k-th delta");
  bool contraction = true;
  for (double e : mollified) contraction = contraction && e <= reference + 1e-8;
  report.set_flag("contraction", contraction);
  return report;
}

}  // namespace orlicz
