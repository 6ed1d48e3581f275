#pragma once

#include <cmath>
#include <cstdint>

#include "semilab/error.hpp"
#include "semilab/numeric.hpp"

namespace semilab::specfun {

inline constexpr int kHermiteMaxDegree = 64;

// Probabilists' normalization: H_1 = x, H_2 = x^2 - 1, H_3 = x^3 - 3x.
template <class T>
T hermite(int n, T x) {
  require(n >= 0, ErrorKind::Domain, "negative Hermite degree");
  require(n <= kHermiteMaxDegree, ErrorKind::Unsupported, "Hermite degree above 64");
  T h0 = T(1);
  if (n == 0) return h0;
  T h1 = x;
  for (int k = 1; k < n; ++k) {
    T h2 = x * h1 - T(k) * h0;
    h0 = h1;
    h1 = h2;
  }
  return h1;
}

double log_bessel_i(double order, double x, const Accuracy& acc = {});
double bessel_i(double order, double x, const Accuracy& acc = {});

double log_factorial(std::uint64_t n);

double digamma(double x);

// Regularized upper incomplete gamma Q(a, x) and its logarithm.
double gamma_q(double a, double x);
double log_gamma_q(double a, double x);

template <class T>
T phi_theta(T theta, T x) {
  using std::log;
  require(theta > 0, ErrorKind::Domain, "phi_theta needs theta > 0");
  if (x == T(0)) return theta;
  return x * log(x) - x * log(theta) - x + theta;
}

double phi_theta_inverse(double theta, double y);

template <class T>
T h_crit(T x) {
  using std::log;
  if (x == T(0)) return T(0);
  return x * log(x) - x;
}

double h_crit_inverse(double y);

// F(tau) = (sinh 2tau - 2tau) / (4 sinh^2 tau) = int_0^tau (sinh(tau - s)/sinh tau)^2 ds
template <class T>
T alpha_integral_unit(T tau) {
  using std::expm1;
  using std::sinh;
  require(tau > 0, ErrorKind::Domain, "alpha_integral needs t > 0");
  if (tau < T(1)) {
    // (sinh 2tau - 2tau)/4 as an odd series in tau, over sinh^2 tau
    T u = T(2) * tau, u2 = u * u, term = u * u2 / T(6), num = T(0);
    for (int k = 1; k < 40; ++k) {
      num += term;
      term *= u2 / T((2 * k + 2) * (2 * k + 3));
      if (term < T(1e-18) * num) break;
    }
    T sh = sinh(tau);
    return num / (T(4) * sh * sh);
  }
  T sh = sinh(tau);
  return T(0.5) - (T(2) * tau + expm1(T(-2) * tau)) / (T(4) * sh * sh);
}

// int_0^t (sinh(a(t-s))/sinh(at))^2 ds
template <class T>
T alpha_integral(T a, T t) {
  require(a > 0, ErrorKind::Domain, "alpha_integral needs a > 0");
  return alpha_integral_unit(a * t) / a;
}

template <class T>
struct RateConstants {
  T t{}, a{}, sigma{}, c_t{}, d_t{};
};

template <class T>
RateConstants<T> rate_constants(T t, T a, T sigma) {
  using std::exp;
  using std::expm1;
  using std::sqrt;
  require(t > 0 && a > 0 && sigma > 0, ErrorKind::Domain, "rate constants need t, a, sigma > 0");
  RateConstants<T> r{t, a, sigma, T(0), T(0)};
  T e = exp(-a * t);
  r.d_t = T(2) * a * e / (sigma * sigma * -expm1(T(-2) * a * t));
  r.c_t = sqrt(r.d_t * e);
  return r;
}

}  // namespace semilab::specfun
