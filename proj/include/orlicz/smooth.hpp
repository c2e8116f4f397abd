#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "orlicz/field.hpp"
#include "orlicz/modular.hpp"
#include "orlicz/nfunc.hpp"

namespace orlicz {

/// Radius search for ring j hit the floor radius with a budget still unmet.
class PlanFailure : public std::runtime_error {
 public:
  PlanFailure(int j, std::string budget, const std::string& what)
      : std::runtime_error(what), j_(j), budget_(std::move(budget)) {}
  int ring() const { return j_; }
  const std::string& budget() const { return budget_; }

 private:
  int j_;
  std::string budget_;
};

/// U_j = {p in Q : dist(p, dQ) > 1/j, |s| + |x| < j}, U_0 empty, and rings
/// Q_j = U_{j+1} \ closure(U_{j-1}) for 1 <= j <= j_max.
class ExhaustionCover {
 public:
  ExhaustionCover(Domain q, int j_max);

  const Domain& domain() const { return q_; }
  int j_max() const { return j_max_; }

  double dist(const double* p) const;
  double ell(const double* p) const;
  bool in_u(int j, const double* p) const;
  bool in_ring(int j, const double* p) const;
  int multiplicity(const double* p) const;
  /// Rings whose sets are nonempty for this box.
  const std::vector<int>& rings() const { return rings_; }
  const std::vector<int>& empty_rings() const { return empty_; }

  struct Audit {
    std::size_t points = 0;
    std::size_t uncovered = 0;
    int max_multiplicity = 0;
    bool margins_positive = true;
  };
  /// Cell-centered grid of per_axis^dim points restricted to
  /// dist >= margin.
  Audit audit(double margin, int per_axis) const;

 private:
  Domain q_;
  int j_max_;
  std::vector<int> rings_;
  std::vector<int> empty_;
};

/// Throws DomainError when j_max < 3 or when the cover's reach does not
/// extend to the requested interior margin.
ExhaustionCover build_cover(const Domain& q, int j_max, double margin = 0.0);

/// Smooth partition {zeta_j} subordinate to the rings and cutoffs {psi_j}.
///
/// Each U_k gets an inner and an outer smooth indicator made of products of
/// smooth steps in the box distance and in |s| + |x|; g_j = inner(U_{j+1})
/// - outer(U_{j-1}) is supported in Q_j, and zeta_j = g_j / sum g.
class PartitionOfUnity {
 public:
  PartitionOfUnity(ExhaustionCover cover, double fraction);

  const ExhaustionCover& cover() const { return cover_; }
  double fraction() const { return fraction_; }
  std::size_t dim() const { return cover_.domain().dim(); }

  /// Ramp half-width of the distance factor attached to level k.
  double eta(int k) const;
  double eta_ell() const { return 0.5 * fraction_; }

  /// Box distance beyond which the sum of the g_j is >= 1.
  double reach() const;
  /// Q_cov: dist >= reach and |s| + |x| <= j_max + 1 - 3 eta_ell.
  bool covered(const double* p) const;
  /// Q_cov as a box (only meaningful when |s| + |x| stays below the bound).
  Domain covered_box() const;

  /// g_j with its gradient over all axes (grad may be null).
  double g(int j, const double* p, double* grad) const;

  struct Active {
    int j = 0;
    double zeta = 0.0;
    double grad[3] = {0.0, 0.0, 0.0};
  };
  /// Nonzero zeta_j at p in index order; returns the count (at most 8).
  /// Throws DomainError when p is outside the region where sum g > 0.
  int evaluate(const double* p, Active* out) const;

  double zeta(int j, const double* p) const;
  double zeta_sum(const double* p) const;
  /// Cutoff, identically 1 on Q_j with compact support in Q.
  double psi(int j, const double* p, double* grad) const;
  /// Box distance below which psi_j vanishes, and above which it is 1.
  double psi_zero_dist(int j) const;
  double psi_one_dist(int j) const;
  double psi_one_ell(int j) const;

 private:
  double level_factor(int k, bool inner, const double* p, double* grad) const;

  ExhaustionCover cover_;
  double fraction_;
};

PartitionOfUnity build_partition(const ExhaustionCover& cover, double fraction);

/// Smooth step with Phi(u) = 0 for u <= -1 and 1 for u >= 1.
double smooth_step(double u, double* derivative = nullptr);

/// Normalized bump C exp(1 / (|z|^2 / eps^2 - 1)) / eps^dim on |z| < eps.
class Mollifier {
 public:
  enum class Variant { SpaceTime, TimeOnly };

  Mollifier(double eps, std::size_t dim, Variant variant = Variant::SpaceTime,
            int cells_per_axis = 16);

  double radius() const { return eps_; }
  std::size_t dim() const { return dim_; }
  Variant variant() const { return variant_; }
  double kernel(const double* z) const;

  /// C with integral over the unit ball of C exp(1/(|z|^2-1)) equal to 1.
  static double normalization(std::size_t dim);

  /// Midpoint discretization of the kernel on cells_per_axis cells per axis
  /// over [-eps, eps]^dim; weights are nonnegative, symmetric and sum to 1.
  std::size_t size() const { return weights_.size(); }
  const double* offset(std::size_t k) const { return &offsets_[k * dim_]; }
  double weight(std::size_t k) const { return weights_[k]; }

 private:
  double eps_;
  std::size_t dim_;
  Variant variant_;
  std::vector<double> offsets_;
  std::vector<double> weights_;
};

struct SmoothingOptions {
  int j_max = 8;
  double fraction = 0.25;
  int kernel_cells = 16;
  /// Working-grid cells across one partition ramp.
  int cells_per_ramp = 4;
  double h_max = 1.0 / 64.0;
  /// Node stride per axis for the cheap prediction pass.
  int predict_stride = 4;
  /// Refinement per axis of the audit points for the sup budget.
  int audit_refine = 4;
  double floor_factor = 1e-12;
};

struct BudgetEntry {
  int j = 0;
  double eps = 0.0;
  int halvings = 0;
  double m = 1.0;
  std::size_t nodes = 0;
  double a = 0.0, a_cap = 0.0;
  double b = 0.0, b_cap = 0.0;
  double c_l1 = 0.0, c_sup = 0.0, c_cap = 0.0;
  double c_sup_audit = 0.0;
  double d = 0.0, d_cap = 0.0;

  bool satisfied() const;
};

/// Tensor grid over Q_cov whose cell widths shrink like dist^2 toward dQ.
struct WorkingGrid {
  std::vector<std::vector<double>> centers;
  std::vector<std::vector<double>> widths;

  std::size_t dim() const { return centers.size(); }
  std::size_t size() const;
  void node(std::size_t flat, double* p) const;
  double volume(std::size_t flat) const;
  std::vector<std::size_t> index(std::size_t flat) const;
};

WorkingGrid build_working_grid(const PartitionOfUnity& partition,
                               const SmoothingOptions& options);

/// Per-node convolution results for one ring at its chosen radius.
struct RingCache {
  int j = 0;
  std::vector<std::size_t> nodes;
  std::vector<double> zeta;     // per node
  std::vector<double> grad;     // per node, dim entries (all axes)
  std::vector<double> conv_b;   // per node, m entries
  std::vector<double> conv_db;  // per node, m*n entries
  std::vector<double> conv_phi; // per node
};

struct SmoothingPlan {
  Domain q;
  std::shared_ptr<const PartitionOfUnity> partition;
  NFunction phi = NFunction::exp_star();
  double delta = 0.0;
  SmoothingOptions options;
  std::vector<BudgetEntry> ledger;
  std::vector<int> skipped;
  std::shared_ptr<const WorkingGrid> grid;
  std::shared_ptr<const std::vector<RingCache>> cache;

  double eps(int j) const;
  nlohmann::json to_json() const;
};

/// Radius selection by halving from delta/2 for every nonempty ring.
SmoothingPlan choose_radii(const Field& b, const NFunction& phi, const Weight& w,
                           const PartitionOfUnity& partition, double delta,
                           const SmoothingOptions& options = {});

SmoothingPlan choose_radii(const Field& b, const NFunction& phi, const Weight& w,
                           double delta, const SmoothingOptions& options = {});

/// b_delta = sum_j zeta_j (rho_{eps_j} * b_j) with the decomposition
/// Db_delta = v_delta + z_delta.
class SmoothedField {
 public:
  SmoothedField(Field b, SmoothingPlan plan);

  struct Parts {
    std::vector<double> b;   // m
    std::vector<double> db;  // m*n
    std::vector<double> v;   // m*n
    std::vector<double> z;   // m*n
    double g = 0.0;          // G_delta
  };
  void evaluate(const double* p, Parts& out) const;

  const Field& original() const { return b_; }
  const Field& original_gradient() const { return db_; }
  const SmoothingPlan& plan() const { return plan_; }
  std::size_t components() const { return b_.arity().size(); }
  std::size_t spatial_dim() const { return plan_.q.spatial_dim(); }

  /// b_delta as an analytic field over Q_cov with registered gradient.
  Field field() const;

 private:
  Field b_;
  Field db_;
  SmoothingPlan plan_;
};

SmoothedField smooth(const Field& b, const SmoothingPlan& plan);

/// Working-grid values of a plan: node volumes and the per-node original
/// and smoothed quantities.
struct PlanSnapshot {
  std::size_t m = 1, n = 1;
  std::vector<double> volume;
  std::vector<double> b, db, w;          // originals
  std::vector<double> b_delta, v, z, g;  // smoothed, db_delta = v + z
  std::vector<double> db_delta;

  double db_l1() const;           // sum vol |Db_delta - Db|
  double z_sup() const;
  double energy(const NFunction& phi, bool smoothed) const;
  double energy_l1(const NFunction& phi) const;  // sum vol w|phi(|Db_d|)-phi(|Db|)|
  /// sum vol phi(|Db_delta - Db| / lambda).
  double gradient_modular(const NFunction& phi, double lambda) const;
  double value_modular(const NFunction& phi) const;  // sum vol phi(|b_d - b|)
  /// Luxemburg norm of b_delta - b on the grid (inf if the bracket fails).
  double value_norm(const NFunction& phi, double tol = 1e-9) const;
};

PlanSnapshot snapshot(const Field& b, const Weight& w, const SmoothingPlan& plan);

struct EnergyConvergence {
  ConvergenceReport report;
  std::vector<SmoothingPlan> plans;
  std::vector<PlanSnapshot> snapshots;
  double reference_energy = 0.0;
};

/// Runs choose_radii and smooth per delta. Columns: energy_l1, energy_gap,
/// db_l1, z_sup. Flag "energy": gap non-increasing and final gap below
/// rel_tol * N_{phi,w}(|Db|); flag "db_l1": every db_l1 <= delta.
EnergyConvergence verify_energy_convergence(const Field& b, const NFunction& phi,
                                            const Weight& w,
                                            const std::vector<double>& delta_ladder,
                                            const SmoothingOptions& options = {},
                                            double rel_tol = 1e-2);

/// b^eps(t, x) = sum_k W_k(t) b(s_k, x) on the node grid s_k = t_lo + (k+1/2)h,
/// h = |I| / ceil(8 |I| / eps), with W_k(t) = rho_eps(t - s_k) / sum_l
/// rho_eps(t - s_l) and b extended by zero outside I.
Field time_mollify(const Field& b, double eps);

/// phi(|v_delta|) <= G_delta at random points of Q_cov.
VerificationReport check_jensen_step(const SmoothedField& s, std::size_t points = 1000,
                                     std::uint32_t seed = 7);
VerificationReport check_jensen_step(const Field& b, const SmoothingPlan& plan,
                                     const NFunction& phi, std::size_t points = 1000,
                                     std::uint32_t seed = 7);

/// w phi(|Db_delta|) <= k ((1 + sup sigma) w G_delta + w sigma) with
/// sigma = phi(|z_delta|), on the working grid.
VerificationReport check_domination(const PlanSnapshot& snap, const NFunction& phi,
                                    double k);

/// Time-mollify with eps_k then smooth with delta_k (k-th with k-th).
ConvergenceReport diagonal_energy_ladder(const Field& b, const NFunction& phi,
                                         const Weight& w,
                                         const std::vector<double>& eps_ladder,
                                         const std::vector<double>& delta_ladder,
                                         const SmoothingOptions& options = {});

}  // namespace orlicz
