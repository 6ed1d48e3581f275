#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace semilab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

template <class T>
T log_add_exp(T a, T b) {
  using std::exp;
  using std::log1p;
  if (a == -std::numeric_limits<T>::infinity()) return b;
  if (b == -std::numeric_limits<T>::infinity()) return a;
  return a > b ? a + log1p(exp(b - a)) : b + log1p(exp(a - b));
}

double log_sum_exp(std::span<const double> xs);

// log(exp(a) - exp(b)), a >= b
double log_sub_exp(double a, double b);

struct Accuracy {
  double rel_tol = 1e-16;
  double abs_tol = 0.0;
  long max_terms = 400000;
};

std::vector<double> linspace(double a, double b, std::size_t n);
std::vector<double> logspace(double a, double b, std::size_t n);

// Increasing f with f(lo) <= target <= f(hi); bisection down to a narrow bracket, then Illinois.
double solve_increasing(const std::function<double(double)>& f, double lo, double hi,
                        double target, double x_tol);

// Maximizer of a unimodal function on [lo, hi].
double golden_max(const std::function<double(double)>& f, double lo, double hi, double x_tol);

// Integer argmax of a unimodal sequence on [lo, hi].
long long integer_argmax(const std::function<double(long long)>& f, long long lo, long long hi);

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
  int evaluations = 0;
};

// Global adaptive Gauss-Kronrod (7/15) on [a, b] with optional interior breakpoints.
QuadResult integrate(const std::function<double(double)>& f, double a, double b,
                     double abs_tol = 1e-13, double rel_tol = 1e-12,
                     std::span<const double> breaks = {}, int max_intervals = 4000);

struct HermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;  // expectation weights for a standard normal, sum to 1
};

// Golub-Welsch rule for E[g(xi)], xi ~ N(0, 1); cached per order.
const HermiteRule& gauss_hermite(int order);

}  // namespace semilab
