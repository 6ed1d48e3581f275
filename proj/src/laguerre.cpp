#include "semilab/laguerre.hpp"

#include <algorithm>
#include <cmath>

#include "semilab/error.hpp"
#include "semilab/numeric.hpp"
#include "semilab/specfun.hpp"

namespace semilab::laguerre {

double GammaMeasure::log_density(double x) const {
  if (x <= 0) return -kInf;
  return (alpha - 1) * std::log(x) - x - std::lgamma(alpha);
}

double GammaMeasure::density(double x) const { return std::exp(log_density(x)); }

double GammaMeasure::log_upper_tail(double x) const {
  if (x <= 0) return 0.0;
  return specfun::log_gamma_q(alpha, x);
}

double GammaMeasure::mass(double a, double b) const {
  a = std::max(a, 0.0);
  if (!(b > a)) return 0.0;
  double la = log_upper_tail(a);
  double lb = std::isinf(b) ? -kInf : log_upper_tail(b);
  if (lb >= la) return 0.0;
  return std::exp(log_sub_exp(la, lb));
}

GammaMeasure gamma_measure(double alpha) {
  require(alpha > 0 && std::isfinite(alpha), ErrorKind::Domain, "gamma measure needs alpha > 0");
  return {alpha};
}

KernelParams kernel_params(double alpha, double t) {
  require(alpha > 0 && std::isfinite(alpha), ErrorKind::Domain, "laguerre kernel needs alpha > 0");
  require(t > 0 && std::isfinite(t), ErrorKind::Domain, "laguerre kernel needs t > 0");
  return {alpha, t, 2 * std::exp(0.5 * t) / std::expm1(t)};
}

namespace {

// L_k^{(a)}(x) by the three-term recurrence
double lag(double a, int k, double x) {
  if (k < 0) return 0.0;
  double l0 = 1.0;
  if (k == 0) return l0;
  double l1 = 1 + a - x;
  for (int j = 1; j < k; ++j) {
    double l2 = ((2 * j + 1 + a - x) * l1 - (j + a) * l0) / (j + 1);
    l0 = l1;
    l1 = l2;
  }
  return l1;
}

void check_degree(int k) {
  require(k >= 0 && k <= 10, ErrorKind::Precondition, "laguerre_poly: degree must be in [0, 10]");
}

}  // namespace

double laguerre_poly(double alpha, int k, double x) {
  check_degree(k);
  require(alpha > 0, ErrorKind::Domain, "laguerre_poly needs alpha > 0");
  return lag(alpha - 1, k, x);
}

double generator_check(double alpha, int k, double x) {
  check_degree(k);
  require(alpha > 0, ErrorKind::Domain, "generator_check needs alpha > 0");
  double q = lag(alpha - 1, k, x), d1 = -lag(alpha, k - 1, x), d2 = lag(alpha + 1, k - 2, x);
  return std::abs(x * d2 + (alpha - x) * d1 + k * q);
}

double log_kernel(const KernelParams& p, double x, double y) {
  require(x >= 0 && y >= 0 && std::isfinite(x) && std::isfinite(y), ErrorKind::Domain,
          "laguerre kernel needs x, y >= 0");
  double em1 = std::expm1(p.t);
  if (x == 0 || y == 0) return -p.alpha * std::log1p(-std::exp(-p.t)) - (x + y) / em1;
  double z = p.c_t * std::sqrt(x * y);
  return std::lgamma(p.alpha) + p.t - std::log(em1) + 0.5 * (p.alpha - 1) * (p.t - std::log(x) - std::log(y)) -
         (x + y) / em1 + specfun::log_bessel_i(p.alpha - 1, z);
}

double laguerre_kernel(const KernelParams& p, double x, double y) {
  double l = log_kernel(p, x, y);
  require(l < 709.0, ErrorKind::Range, "laguerre kernel overflows double; use log_kernel");
  return std::exp(l);
}

namespace {

// int_lo^hi e^{logw(y) - ref} f(y) nu_alpha(dy), ref the max of logw + log phi over the breaks.
// For alpha < 1 the variable y = u^{1/alpha} removes the y^{alpha-1} singularity.
struct Weighted {
  double value = 0.0;
  double ref = 0.0;
};

Weighted weighted_integral(double alpha, const std::function<double(double)>& logw, const std::function<double(double)>* f,
                           double lo, double hi, std::vector<double> breaks, double abs_tol, double rel_tol) {
  GammaMeasure g{alpha};
  bool sub = alpha < 1;
  double lg1 = std::lgamma(alpha + 1);
  auto logdens = [&](double y) { return logw(y) + g.log_density(y); };
  double ref = -kInf, fmax = 0;
  for (double b : breaks)
    if (b > lo && b < hi) {
      ref = std::max(ref, logdens(b));
      if (f) fmax = std::max(fmax, std::abs((*f)(b)));
    }
  require(std::isfinite(ref), ErrorKind::Accuracy, "weighted integral: no finite reference point");
  std::vector<double> br;
  for (double b : breaks)
    if (b > lo && b < hi) br.push_back(sub ? std::pow(b, alpha) : b);
  std::sort(br.begin(), br.end());
  auto fv = [&](double y) { return f ? (*f)(y) : 1.0; };
  double a = sub ? std::pow(lo, alpha) : lo, b = sub ? std::pow(hi, alpha) : hi;
  std::function<double(double)> integrand;
  if (sub)
    integrand = [&](double u) {
      double y = std::pow(u, 1 / alpha);
      return std::exp(logw(y) - y - lg1 - ref) * fv(y);
    };
  else
    integrand = [&](double y) {
      if (y <= 0) return 0.0;
      return std::exp(logdens(y) - ref) * fv(y);
    };
  double scale = f ? std::max(fmax, 1e-300) : 1.0;
  auto q = integrate(integrand, a, b, abs_tol > 0 ? abs_tol : 1e-15 * scale, rel_tol, br, 8000);
  return {q.value, ref};
}

}  // namespace

double laguerre_apply(double alpha, const std::function<double(double)>& f, double t, double x, const ApplyOptions& opt) {
  auto p = kernel_params(alpha, t);
  require(x >= 0 && std::isfinite(x), ErrorKind::Domain, "laguerre_apply needs x >= 0");
  require(opt.growth >= 0 && opt.growth < 1, ErrorKind::Accuracy,
          "laguerre_apply: declared growth is not integrable against the Gamma measure");
  double e = std::exp(-t);
  double m = x * e + alpha * (1 - e);
  double sd = std::sqrt(2 * x * (e - e * e) + alpha * (1 - e) * (1 - e));
  double R = m + 12 * sd + 45 / (1 - opt.growth);
  std::vector<double> breaks;
  for (double k : {-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0}) breaks.push_back(m + k * sd);
  auto logw = [&](double y) { return log_kernel(p, x, y); };
  auto w = weighted_integral(alpha, logw, &f, 0.0, R, breaks, opt.abs_tol, opt.rel_tol);
  double edge = logw(R) + GammaMeasure{alpha}.log_density(R) + opt.growth * R - w.ref;
  require(edge < -36, ErrorKind::Accuracy, "laguerre_apply: integrand does not decay on the quadrature range");
  return w.value * std::exp(w.ref);
}

double log_hess_32_scalar(double z) {
  require(z >= 0, ErrorKind::Domain, "log_hess_32 needs z >= 0");
  if (z < 0.1) {
    double z2 = z * z, z4 = z2 * z2;
    return z4 * (-2.0 / 45 + z2 * (8.0 / 945 + z2 * (-2.0 / 1575 + z2 * 16.0 / 93555)));
  }
  double sh = std::sinh(z);
  double q = std::isinf(sh) ? 0.0 : z * z / (sh * sh);
  return 2 - q - z / std::tanh(z);
}

double log_hess_32(double t, double x, double y) {
  require(x > 0 && y > 0, ErrorKind::Domain, "log_hess_32 needs x, y > 0");
  auto p = kernel_params(1.5, t);
  return log_hess_32_scalar(p.c_t * std::sqrt(x * y)) / (4 * x * x);
}

UnboundednessReport log_hess_unboundedness(double t, const std::vector<double>& x_grid, const std::vector<double>& y_grid) {
  require(!x_grid.empty() && y_grid.size() >= 2, ErrorKind::Domain, "unboundedness check needs nonempty grids");
  auto p = kernel_params(1.5, t);
  UnboundednessReport r;
  r.min_value = kInf;
  r.max_value = -kInf;
  for (double x : x_grid) {
    double prev = kInf, v = 0;
    for (double y : y_grid) {
      v = log_hess_32(t, x, y);
      if (v < r.min_value) {
        r.min_value = v;
        r.argmin_x = x;
        r.argmin_y = y;
      }
      r.max_value = std::max(r.max_value, v);
      if (v > prev) r.monotone_in_y = false;
      prev = v;
    }
    double y = y_grid.back();
    r.asymptotic_ratio.push_back(v / (-p.c_t * std::sqrt(y / x) / (4 * x)));
  }
  return r;
}

double gamma_gauss_log_norm(double alpha, double beta, double a) {
  require(alpha > 0, ErrorKind::Domain, "gamma_gauss_log_norm needs alpha > 0");
  require(beta > 0, ErrorKind::Precondition, "gamma counterexample needs beta > 0");
  require(std::isfinite(a), ErrorKind::Domain, "gamma_gauss_log_norm needs finite a");
  // mode of -beta/2 (x-a)^2 + (alpha-1) ln x - x
  double bq = beta * a - 1;
  double mode = alpha >= 1 ? (bq + std::sqrt(bq * bq + 4 * beta * (alpha - 1))) / (2 * beta) : std::max(a - 1 / beta, 0.0);
  double width = std::sqrt(90 / beta) + 5;
  double lo = std::max(0.0, std::min(mode, a) - width), hi = std::max(mode, a) + width + 45;
  std::vector<double> breaks{mode, a, mode + 1 / std::sqrt(beta), mode - 1 / std::sqrt(beta)};
  if (mode <= 0) breaks.push_back(std::min(1.0, hi / 2));
  auto logw = [&](double x) { return -0.5 * beta * (x - a) * (x - a); };
  auto w = weighted_integral(alpha, logw, nullptr, lo, hi, breaks, 0.0, 1e-13);
  require(w.value > 0, ErrorKind::Accuracy, "gamma_gauss_log_norm: vanishing integral");
  return -(w.ref + std::log(w.value));
}

GammaCounterexampleReport gamma_counterexample(double alpha, double beta, const std::vector<double>& a_grid) {
  require(beta > 0, ErrorKind::Precondition, "gamma counterexample needs beta > 0");
  require(!a_grid.empty(), ErrorKind::Domain, "gamma counterexample needs a nonempty a grid");
  GammaMeasure g = gamma_measure(alpha);
  GammaCounterexampleReport r;
  r.alpha = alpha;
  r.beta = beta;
  std::vector<double> Z, lphi;
  double lc = -kInf;
  for (double a : a_grid) {
    require(a > 0, ErrorKind::Domain, "gamma counterexample needs a > 0");
    Z.push_back(gamma_gauss_log_norm(alpha, beta, a));
    lphi.push_back(g.log_density(a));
    lc = std::max(lc, -Z.back() - lphi.back());
  }
  r.c_fit = std::exp(lc);
  r.floor = r.min_window_ratio = r.min_radius = kInf;
  for (std::size_t i = 0; i < a_grid.size(); ++i) {
    GammaCounterexampleRow row;
    row.a = a_grid[i];
    row.Z = Z[i];
    row.log_t = -lphi[i] - lc - 0.5 * beta;
    row.radius = std::sqrt(std::max(0.0, 2 / beta * (row.Z - row.log_t)));
    row.tail = g.mass(row.a - row.radius, row.a + row.radius);
    row.product = std::exp(row.log_t + std::log(row.tail));
    row.window_ratio = std::exp(std::log(g.mass(row.a - 1, row.a + 1)) - lphi[i]);
    r.floor = std::min(r.floor, row.product);
    r.min_window_ratio = std::min(r.min_window_ratio, row.window_ratio);
    r.min_radius = std::min(r.min_radius, row.radius);
    r.rows.push_back(row);
  }
  return r;
}

SupKernel sup_kernel(double alpha, double s, double x) {
  auto p = kernel_params(alpha, s);
  require(x > 0 && std::isfinite(x), ErrorKind::Domain, "sup_kernel needs x > 0");
  double es = std::exp(s);
  double y_hi = 4 * x * es + 50 * std::expm1(s) + 10;
  const int n = 241;
  auto ly = linspace(std::log(1e-10), std::log(y_hi), n);
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = log_kernel(p, x, std::exp(ly[i]));
  bool down = false;
  int best = 0;
  for (int i = 1; i < n; ++i) {
    double d = v[i] - v[i - 1], tol = 1e-12 * (1 + std::abs(v[i]));
    if (d < -tol) down = true;
    require(!(down && d > tol), ErrorKind::Accuracy, "sup_kernel: ln y profile is not unimodal");
    if (v[i] > v[best]) best = i;
  }
  require(best != n - 1, ErrorKind::Range, "sup_kernel: maximizer at the upper search boundary");
  SupKernel out{x, 0.0, log_kernel(p, x, 0.0)};
  if (best > 0) {
    auto obj = [&](double l) { return log_kernel(p, x, std::exp(l)); };
    double lm = golden_max(obj, ly[best - 1], ly[best + 1], 1e-10);
    double vm = std::max(obj(lm), v[best]);
    if (vm > out.log_value) {
      out.y_star = vm == v[best] ? std::exp(ly[best]) : std::exp(lm);
      out.log_value = vm;
    }
  }
  return out;
}

LaguerreTalagrand laguerre_talagrand_tail(double alpha, double s, const std::vector<double>& t_grid) {
  require(s > 0, ErrorKind::Domain, "laguerre talagrand needs s > 0");
  require(!t_grid.empty(), ErrorKind::Domain, "laguerre talagrand needs a nonempty t grid");
  for (std::size_t i = 0; i < t_grid.size(); ++i)
    require(t_grid[i] > 1 && (i == 0 || t_grid[i] > t_grid[i - 1]), ErrorKind::Domain,
            "laguerre talagrand: t grid must increase from above 1");
  GammaMeasure g = gamma_measure(alpha);
  auto lS = [&](double x) { return sup_kernel(alpha, s, x).log_value; };
  double top = std::log(t_grid.back()) + 3;
  double X = 10;
  while (!(lS(X) >= top && lS(X) > lS(X / 2))) {
    X *= 2;
    require(X < 1e4, ErrorKind::Range, "laguerre talagrand: sup kernel does not reach the largest level");
  }
  const double x0 = 1e-8;
  auto xs = logspace(x0, X, 400);
  LaguerreTalagrand r;
  std::vector<double> vs;
  for (double x : xs) {
    r.profile.push_back(sup_kernel(alpha, s, x));
    vs.push_back(r.profile.back().log_value);
  }
  r.curve.label = "laguerre alpha=" + std::to_string(alpha) + " s=" + std::to_string(s);
  r.curve.envelope = "1/(t sqrt(ln t))";
  for (double t : t_grid) {
    double level = std::log(t);
    auto cross = [&](double a, double b, bool rising) {
      for (int it = 0; it < 60 && b - a > 1e-13 * b; ++it) {
        double m = 0.5 * (a + b);
        if ((lS(m) >= level) == rising)
          b = m;
        else
          a = m;
      }
      return 0.5 * (a + b);
    };
    double tail = 0, start = 0;
    bool in = vs[0] >= level;
    for (std::size_t i = 1; i < xs.size(); ++i) {
      bool above = vs[i] >= level;
      if (above == in) continue;
      double c = cross(xs[i - 1], xs[i], above);
      if (above)
        start = c;
      else
        tail += g.mass(start, c);
      in = above;
    }
    if (in) tail += g.mass(start, kInf);
    r.curve.points.push_back({t, tail, 0.0});
  }
  double c = 0;
  for (auto& pt : r.curve.points) c = std::max(c, pt.tail * pt.t * std::sqrt(std::log(pt.t)));
  r.curve.fitted_constant = c;
  for (auto& pt : r.curve.points) pt.bound = c / (pt.t * std::sqrt(std::log(pt.t)));
  auto& last = r.curve.points.back();
  r.tail_ratio_last = last.tail * last.t * std::sqrt(std::log(last.t));
  return r;
}

}  // namespace semilab::laguerre
