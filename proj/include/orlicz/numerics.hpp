#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace orlicz::numerics {

/// Neumaier-compensated running sum. Order-dependent but deterministic.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      carry_ += (sum_ - t) + x;
    } else {
      carry_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  CompensatedSum& operator+=(double x) {
    add(x);
    return *this;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

/// Bisection for a nondecreasing f with f(lo) < 0 <= f(hi). Returns the
/// right end of the final bracket, so f(result) >= 0 always holds.
template <typename F>
double bisect_increasing(F&& f, double lo, double hi, double x_tol,
                         int max_iter = 400) {
  if (!(lo < hi)) throw std::invalid_argument("bisect_increasing: lo >= hi");
  if (f(lo) >= 0.0) return lo;
  if (f(hi) < 0.0) throw std::invalid_argument("bisect_increasing: no sign change");
  for (int i = 0; i < max_iter && hi - lo > x_tol; ++i) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) >= 0.0) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  out.back() = hi;
  return out;
}

inline std::vector<double> logspace(double lo, double hi, std::size_t n) {
  auto exps = linspace(std::log(lo), std::log(hi), n);
  for (auto& e : exps) e = std::exp(e);
  if (n > 0) {
    exps.front() = lo;
    exps.back() = hi;
  }
  return exps;
}

/// Worker count used by parallel_for. 1 runs everything inline.
void set_thread_count(int n);
int thread_count();

/// Calls body(i) for i in [0, n). Work is split into contiguous chunks; the
/// body must only write to slots owned by its index.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace orlicz::numerics
