#include "semilab/specfun.hpp"

#include <algorithm>
#include <string>

namespace semilab::specfun {

double log_bessel_i(double order, double x, const Accuracy& acc) {
  require(order > -1.0, ErrorKind::Domain, "bessel_i needs order > -1");
  require(x > 0 && std::isfinite(x), ErrorKind::Domain, "bessel_i needs finite x > 0");
  const double half = 0.5 * x, q = half * half;
  double scale = order * std::log(half) - std::lgamma(order + 1.0);
  double term = 1.0, sum = 1.0;
  for (long n = 0; n < acc.max_terms; ++n) {
    double r = q / ((n + 1.0) * (n + order + 1.0));
    term *= r;
    if (term > 1e250) {
      sum /= term;
      scale += std::log(term);
      term = 1.0;
    }
    sum += term;
    if (r < 1.0 && term * r / (1.0 - r) <= acc.rel_tol * sum) return scale + std::log(sum);
  }
  fail(ErrorKind::Accuracy, "bessel_i series did not converge within max_terms");
}

double bessel_i(double order, double x, const Accuracy& acc) {
  double l = log_bessel_i(order, x, acc);
  require(l < 709.0, ErrorKind::Range, "bessel_i overflows double; use log_bessel_i");
  return std::exp(l);
}

double log_factorial(std::uint64_t n) {
  if (n <= 20) {
    std::uint64_t p = 1;
    for (std::uint64_t k = 2; k <= n; ++k) p *= k;
    return std::log(static_cast<double>(p));
  }
  return std::lgamma(static_cast<double>(n) + 1.0);
}

double digamma(double x) {
  require(x > 0 && std::isfinite(x), ErrorKind::Domain, "digamma needs finite x > 0");
  double shift = 0.0;
  while (x < 10.0) {
    shift -= 1.0 / x;
    x += 1.0;
  }
  double r = 1.0 / (x * x);
  double tail = r * (1.0 / 12 - r * (1.0 / 120 - r * (1.0 / 252 - r * (1.0 / 240 - r * (1.0 / 132 - r * (691.0 / 32760 - r / 12))))));
  return shift + std::log(x) - 0.5 / x - tail;
}

namespace {

// log P(a, x) by series, valid for x < a + 1
double log_gamma_p_series(double a, double x) {
  double ap = a, del = 1.0 / a, sum = del;
  for (int n = 0; n < 100000; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-17) break;
  }
  return std::log(sum) - x + a * std::log(x) - std::lgamma(a);
}

// log Q(a, x) by Lentz continued fraction, valid for x >= a + 1
double log_gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i < 100000; ++i) {
    double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return std::log(h) - x + a * std::log(x) - std::lgamma(a);
}

}  // namespace

double log_gamma_q(double a, double x) {
  require(a > 0, ErrorKind::Domain, "gamma_q needs a > 0");
  require(x >= 0, ErrorKind::Domain, "gamma_q needs x >= 0");
  if (x == 0) return 0.0;
  if (x < a + 1.0) {
    double lp = log_gamma_p_series(a, x);
    return std::log1p(-std::exp(lp));
  }
  return log_gamma_q_cf(a, x);
}

double gamma_q(double a, double x) { return std::exp(log_gamma_q(a, x)); }

double phi_theta_inverse(double theta, double y) {
  require(theta > 0, ErrorKind::Domain, "phi_theta needs theta > 0");
  double lo = std::max(1.0, theta);
  double ymin = phi_theta(theta, lo);
  require(y >= ymin, ErrorKind::Domain, "phi_theta_inverse: y below branch minimum " + std::to_string(ymin));
  auto f = [theta](double x) { return phi_theta(theta, x); };
  double hi = 2.0 * lo + 1.0;
  while (f(hi) < y) hi *= 2.0;
  return solve_increasing(f, lo, hi, y, 1e-15);
}

double h_crit_inverse(double y) {
  require(y >= -1.0, ErrorKind::Domain, "h_crit_inverse: y below branch minimum -1");
  auto f = [](double x) { return h_crit(x); };
  double hi = 4.0;
  while (f(hi) < y) hi *= 2.0;
  return solve_increasing(f, 1.0, hi, y, 1e-15);
}

}  // namespace semilab::specfun
