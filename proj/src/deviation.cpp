#include "semilab/deviation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "semilab/error.hpp"
#include "semilab/numeric.hpp"
#include "semilab/seed.hpp"
#include "semilab/specfun.hpp"

namespace semilab::deviation {

using discrete::Index;

namespace {

std::vector<double> grid_on(double lo, double hi, std::size_t n) { return linspace(lo, hi, n); }

void require_convex(const std::vector<double>& xs, const std::vector<double>& g) {
  double scale = 0;
  for (double v : g) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 1; i + 1 < xs.size(); ++i) {
    double d2 = g[i + 1] - 2 * g[i] + g[i - 1];
    require(d2 >= -1e-10 * std::max(1.0, scale), ErrorKind::Precondition, "convex_conjugate: input is not convex");
  }
}

}  // namespace

std::vector<double> convex_conjugate(const std::function<double(double)>& g, double lo, double hi,
                                     const std::vector<double>& y_grid, std::size_t n_grid) {
  require(hi > lo && n_grid >= 3, ErrorKind::Domain, "convex_conjugate: bad range");
  auto xs = grid_on(lo, hi, n_grid);
  std::vector<double> gv(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) gv[i] = g(xs[i]);
  require_convex(xs, gv);
  std::vector<double> out;
  out.reserve(y_grid.size());
  for (double y : y_grid) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < xs.size(); ++i)
      if (y * xs[i] - gv[i] > y * xs[best] - gv[best]) best = i;
    double v = y * xs[best] - gv[best];
    double a = xs[best > 0 ? best - 1 : 0], b = xs[std::min(best + 1, xs.size() - 1)];
    if (b > a) {
      auto obj = [&](double x) { return y * x - g(x); };
      double xm = golden_max(obj, a, b, 1e-12 * std::max(1.0, std::abs(xs[best])));
      v = std::max(v, obj(xm));
    }
    out.push_back(v);
  }
  return out;
}

std::vector<double> biconjugate(const std::function<double(double)>& g, double lo, double hi,
                                const std::vector<double>& x_grid, std::size_t n_grid) {
  double e = (hi - lo) * 1e-7;
  double s_lo = (g(lo + e) - g(lo)) / e, s_hi = (g(hi) - g(hi - e)) / e;
  auto ys = grid_on(s_lo, s_hi, n_grid);
  auto gs = convex_conjugate(g, lo, hi, ys, n_grid);
  std::vector<double> out;
  for (double x : x_grid) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < ys.size(); ++i)
      if (x * ys[i] - gs[i] > x * ys[best] - gs[best]) best = i;
    double v = x * ys[best] - gs[best];
    double a = ys[best > 0 ? best - 1 : 0], b = ys[std::min(best + 1, ys.size() - 1)];
    if (b > a) {
      auto obj = [&](double y) { return x * y - convex_conjugate(g, lo, hi, {y}, n_grid)[0]; };
      double ym = golden_max(obj, a, b, 1e-10 * std::max(1.0, std::abs(ys[best])));
      v = std::max(v, obj(ym));
    }
    out.push_back(v);
  }
  return out;
}

void check_semiconvex(const SemiConvexFn& f, double lo, double hi, double tol) {
  const double h = 1e-3;
  for (double x = lo + h; x < hi - h; x += 0.01) {
    double d2 = (f.phi(x + h) - 2 * f.phi(x) + f.phi(x - h)) / (h * h);
    require(d2 >= -f.beta - tol * std::max(1.0, f.beta), ErrorKind::Precondition,
            "semi-convexity violated for " + f.name);
  }
}

double log_mass(const Potential1D& h) { return diffusion::log_normalizer(h); }

namespace {

double reach(const Potential1D& h) { return std::sqrt(1500.0 / std::max(h.c, 0.5)); }

// superlevel sets of a function on [-R, R]: grid plus refined local maxima, crossings by bisection
class Superlevel {
 public:
  Superlevel(std::function<double(double)> f, double R, std::size_t n) : f_(std::move(f)) {
    auto xs = linspace(-R, R, n);
    std::vector<double> vs(n);
    for (std::size_t i = 0; i < n; ++i) vs[i] = f_(xs[i]);
    for (std::size_t i = 0; i < n; ++i) {
      pts_.push_back({xs[i], vs[i]});
      if (i > 0 && i + 1 < n && vs[i] >= vs[i - 1] && vs[i] >= vs[i + 1]) {
        double xm = golden_max(f_, xs[i - 1], xs[i + 1], 1e-13 * std::max(1.0, std::abs(xs[i])));
        double fm = f_(xm);
        if (fm > vs[i]) pts_.push_back({xm, fm});
      }
    }
    std::sort(pts_.begin(), pts_.end());
  }

  std::vector<std::pair<double, double>> intervals(double level) const {
    std::vector<std::pair<double, double>> out;
    bool in = false;
    double start = 0;
    for (std::size_t i = 0; i < pts_.size(); ++i) {
      bool above = pts_[i].second >= level;
      if (i == 0) {
        if (above) {
          in = true;
          start = pts_[0].first;
        }
        continue;
      }
      if (above != in) {
        double a = pts_[i - 1].first, b = pts_[i].first;
        for (int it = 0; it < 80 && b - a > 1e-15 * std::max(1.0, std::abs(a)); ++it) {
          double m = 0.5 * (a + b);
          if ((f_(m) >= level) == in)
            a = m;
          else
            b = m;
        }
        double x = 0.5 * (a + b);
        if (above) {
          start = x;
        } else {
          out.push_back({start, x});
        }
        in = above;
      }
    }
    if (in) out.push_back({start, pts_.back().first});
    return out;
  }

  double max_value() const {
    double m = -kInf;
    for (auto& p : pts_) m = std::max(m, p.second);
    return m;
  }
  double argmax() const {
    auto it = std::max_element(pts_.begin(), pts_.end(), [](auto& a, auto& b) { return a.second < b.second; });
    return it->first;
  }

 private:
  std::function<double(double)> f_;
  std::vector<std::pair<double, double>> pts_;
};

double density_mass(const Potential1D& h, double logZ, double a, double b) {
  if (b <= a) return 0.0;
  // shift by the minimum of h on [a, b] to keep relative accuracy for tiny masses
  double hmin = std::min(h.h(a), h.h(b));
  if (a < 0 && b > 0) hmin = std::min(hmin, h.h(0.0));
  auto q = integrate([&](double x) { return std::exp(-(h.h(x) - hmin)); }, a, b, 0.0, 1e-11);
  return q.value * std::exp(-hmin - logZ);
}

}  // namespace

double log_integral(const Potential1D& h, const std::function<double(double)>& phi) {
  double R = reach(h), logZ = log_mass(h);
  auto g = [&](double x) { return phi(x) - h.h(x); };
  Superlevel sl(g, R, 4001);
  double M = sl.max_value();
  require(std::isfinite(M), ErrorKind::Accuracy, "log_integral: integrand not finite");
  double brk[] = {sl.argmax()};
  auto q = integrate([&](double x) { return std::exp(g(x) - M); }, -R, R, 0.0, 1e-12, brk);
  require(q.value > 0, ErrorKind::Accuracy, "log_integral: vanishing integral");
  double edge = std::max(g(-R), g(R)) - M;
  require(edge < -30, ErrorKind::Accuracy, "log_integral: integrand does not decay on the quadrature range");
  return M + std::log(q.value) - logZ;
}

double superlevel_measure(const Potential1D& h, const std::function<double(double)>& phi, double level) {
  double R = reach(h), logZ = log_mass(h);
  Superlevel sl(phi, R, 20001);
  double m = 0;
  for (auto [a, b] : sl.intervals(level)) m += density_mass(h, logZ, a, b);
  return m;
}

SupBoundReport check_semiconvex_sup_bound(const Potential1D& h, const SemiConvexFn& f, const std::vector<double>& x_grid) {
  require(h.c >= 0, ErrorKind::Precondition, "sup bound needs h'' >= 0");
  double li = log_integral(h, f.phi), logZ = log_mass(h);
  double a = 0.5 * std::log((h.C + f.beta) / (2 * std::numbers::pi));
  SupBoundReport r;
  r.min_margin = kInf;
  for (double x : x_grid) {
    double lhs = f.phi(x) - li, rhs = a + h.h(x) + logZ;
    r.x.push_back(x);
    r.lhs.push_back(lhs);
    r.rhs.push_back(rhs);
    r.min_margin = std::min(r.min_margin, rhs - lhs);
    if (lhs > rhs + 1e-10 * (1 + std::abs(rhs))) ++r.violations;
  }
  return r;
}

namespace {

double talagrand_envelope(double t) { return 1.0 / (t * std::sqrt(std::log(t))); }

// reused superlevel structure for one phi and many levels
struct DeviationScan {
  const Potential1D& h;
  double logZ;
  Superlevel sl;
  DeviationScan(const Potential1D& hh, const std::function<double(double)>& phi)
      : h(hh), logZ(log_mass(hh)), sl(phi, reach(hh), 20001) {}
  double measure(double level) const {
    double m = 0;
    for (auto [a, b] : sl.intervals(level)) m += density_mass(h, logZ, a, b);
    return m;
  }
};

}  // namespace

DeviationCurve deviation_bound_diffusion(const Potential1D& h, const SemiConvexFn& f, const std::vector<double>& t_grid) {
  require(h.symmetric, ErrorKind::Unsupported, "deviation bound: h must be symmetric");
  require(h.c > 0 && h.C >= h.c, ErrorKind::Precondition, "deviation bound: need 0 < c <= h'' <= C");
  for (double t : t_grid) require(t >= 2, ErrorKind::Domain, "deviation bound: t must be >= 2");
  double li = log_integral(h, f.phi);
  DeviationScan scan(h, f.phi);
  DeviationCurve out;
  out.curve.label = f.name + " | " + h.name;
  out.curve.envelope = "1/(t sqrt(ln t))";
  out.curve.theory_constant = (h.C + f.beta) / h.c;
  for (double t : t_grid) {
    double tail = scan.measure(std::log(t) + li);
    double env = talagrand_envelope(t);
    double bound = out.curve.theory_constant * env;
    out.curve.points.push_back({t, tail, bound});
    out.curve.fitted_constant = std::max(out.curve.fitted_constant, tail / env);
    if (tail > bound * (1 + 1e-9)) ++out.violations;
  }
  return out;
}

std::vector<SemiConvexFn> semiconvex_corpus(std::uint64_t seed, std::size_t count, double beta) {
  require(beta >= 0, ErrorKind::Domain, "semiconvex_corpus: beta must be >= 0");
  std::vector<SemiConvexFn> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::mt19937_64 rng(seed_derive(seed, "slc-corpus", i));
    std::uniform_real_distribution<double> U(0, 1);
    std::ostringstream name;
    name.precision(4);
    SemiConvexFn f;
    f.beta = beta;
    int J = 1 + static_cast<int>(U(rng) * 3);
    std::vector<double> w(J), lam(J), kap(J), mu(J);
    for (int j = 0; j < J; ++j) {
      w[j] = 0.05 + U(rng);
      lam[j] = -3 + 6 * U(rng);
      kap[j] = 0.4 * U(rng);
      mu[j] = -3 + 6 * U(rng);
    }
    double m = -3 + 6 * U(rng), l1 = -1 + 2 * U(rng);
    switch (i % 5) {
      case 0:
        name << "loglinear-mix J=" << J;
        f.phi = [w, lam, J](double x) {
          std::vector<double> a(J);
          for (int j = 0; j < J; ++j) a[j] = std::log(w[j]) + lam[j] * x;
          return log_sum_exp(a);
        };
        break;
      case 1:
        name << "bump m=" << m << " slope=" << l1;
        f.phi = [beta, m, l1](double x) { return -0.5 * beta * (x - m) * (x - m) + l1 * x; };
        break;
      case 2:
        name << "bump-mix J=" << J;
        f.phi = [w, mu, J, beta](double x) {
          std::vector<double> a(J);
          for (int j = 0; j < J; ++j) a[j] = std::log(w[j]) - 0.5 * beta * (x - mu[j]) * (x - mu[j]);
          return log_sum_exp(a);
        };
        break;
      case 3:
        name << "bump-times-convex m=" << m << " J=" << J;
        f.phi = [w, lam, kap, J, beta, m](double x) {
          std::vector<double> a(J);
          for (int j = 0; j < J; ++j) a[j] = std::log(w[j]) + lam[j] * x + 0.5 * kap[j] * x * x;
          return -0.5 * beta * (x - m) * (x - m) + log_sum_exp(a);
        };
        break;
      default:
        name << "logcosh m=" << m << " slope=" << l1;
        f.phi = [beta, m, l1](double x) {
          double z = std::abs(x - m);
          return -beta * (z + std::log1p(std::exp(-2 * z)) - std::log(2.0)) + l1 * x;
        };
        break;
    }
    f.name = name.str() + " beta=" + std::to_string(beta).substr(0, 4);
    out.push_back(std::move(f));
  }
  return out;
}

double poisson_deviation_envelope(double t) { return discrete::mm_talagrand_envelope(t); }

PoissonDeviation poisson_logconvex_deviation(double theta, const discrete::FuncOnN& f, const std::vector<double>& t_grid) {
  require(theta > 0, ErrorKind::Domain, "poisson deviation: theta must be positive");
  for (std::size_t i = 0; i < t_grid.size(); ++i)
    require(t_grid[i] >= 4 && (i == 0 || t_grid[i] > t_grid[i - 1]), ErrorKind::Domain,
            "poisson deviation: t grid must increase from 4");
  require(std::isfinite(f.log_growth), ErrorKind::Growth, "poisson deviation: f needs a finite growth rate");
  // log terms of f * pi until geometric decay and far below the running maximum
  std::vector<double> lf, terms;
  double top = -kInf;
  Index K = 0;
  const Index hard_cap = 10000000;
  for (Index k = 0;; ++k) {
    require(k < hard_cap, ErrorKind::Growth, "poisson deviation: mass did not converge");
    double l = (f.support && k > *f.support) ? -kInf : f.log_at(k);
    lf.push_back(l);
    terms.push_back(l + discrete::log_poisson_pmf(theta, k));
    top = std::max(top, terms.back());
    double kd = static_cast<double>(k);
    if (kd > 2 * theta * std::exp(std::max(0.0, f.log_growth)) && kd > theta && terms.back() < top - 46) {
      K = k;
      break;
    }
    if (f.support && k > *f.support && kd > theta) {
      K = k;
      break;
    }
  }
  for (Index k = 1; k + 1 <= K; ++k) {
    if (!std::isfinite(lf[k - 1]) || !std::isfinite(lf[k]) || !std::isfinite(lf[k + 1])) continue;
    double d = lf[k + 1] - 2 * lf[k] + lf[k - 1];
    require(d >= -discrete::delta_log_tolerance(f, k), ErrorKind::Precondition,
            "poisson deviation: f is not log-convex at " + std::to_string(k));
  }
  double log_mass_f = log_sum_exp(terms);
  PoissonDeviation out;
  out.mass = std::exp(log_mass_f);
  out.curve.label = "poisson log-convex theta=" + std::to_string(theta);
  out.curve.envelope = "sqrt(ln ln t)/(t sqrt(ln t))";
  for (double t : t_grid) {
    double level = std::log(t) + log_mass_f;
    std::vector<double> hit;
    for (Index k = 0; k <= K; ++k)
      if (lf[k] >= level) hit.push_back(discrete::log_poisson_pmf(theta, k));
    double tail = hit.empty() ? 0.0 : std::exp(log_sum_exp(hit));
    double env = poisson_deviation_envelope(t);
    out.curve.points.push_back({t, tail, 0.0});
    out.curve.fitted_constant = std::max(out.curve.fitted_constant, tail / env);
    double lt = std::log(t);
    double ymin = specfun::phi_theta(theta, std::max(1.0, theta));
    if (t >= std::exp(theta - 1) / theta && lt >= ymin) {
      double u = specfun::phi_theta_inverse(theta, lt);
      if (std::ceil(u) >= 2 * theta) {
        ++out.proof_bound_checked;
        if (tail > 2 / (t * std::sqrt(u)) * (1 + 1e-12)) ++out.proof_bound_violations;
      }
    }
  }
  for (auto& p : out.curve.points) p.bound = out.curve.fitted_constant * poisson_deviation_envelope(p.t);
  return out;
}

double c_beta(double beta) {
  require(beta > 0, ErrorKind::Domain, "c_beta: beta must be positive");
  double s = 0;
  for (int n = 0;; ++n) {
    double v = std::exp(-0.5 * beta * n * n);
    s += v;
    if (v < 1e-18 * s) break;
  }
  return -std::log(2 * s);
}

double log_gauss_poisson_mass(double theta, double beta, double a) {
  auto ell = [&](long long n) {
    double d = static_cast<double>(n) - a;
    return -0.5 * beta * d * d + discrete::log_poisson_pmf(theta, n);
  };
  long long hi = static_cast<long long>(std::ceil(std::max(a, theta))) + 2;
  long long n0 = integer_argmax(ell, 0, hi);
  double top = ell(n0);
  std::vector<double> t{top};
  for (long long n = n0 + 1;; ++n) {
    double v = ell(n);
    t.push_back(v);
    if (v < top - 50) break;
  }
  for (long long n = n0 - 1; n >= 0; --n) {
    double v = ell(n);
    t.push_back(v);
    if (v < top - 50) break;
  }
  return log_sum_exp(t);
}

double u_of_a(double theta, double beta, double a) {
  auto G = [&](double u) { return beta * (u - a) + specfun::digamma(u + 1) - std::log(theta); };
  require(G(0.0) <= 0, ErrorKind::Range, "u_of_a: maximizer is at the boundary u = 0");
  double hi = std::max(1.0, a);
  while (G(hi) < 0) hi *= 2;
  return solve_increasing(G, 0.0, hi, 0.0, 1e-14);
}

CounterexampleReport poisson_counterexample(double theta, double beta, double a_lo, double a_hi, std::size_t min_hits) {
  require(theta > 0 && beta > 0, ErrorKind::Domain, "counterexample: need theta, beta > 0");
  require(a_hi > a_lo, ErrorKind::Domain, "counterexample: empty a range");
  CounterexampleReport r;
  r.theta = theta;
  r.beta = beta;
  r.c_beta = c_beta(beta);
  r.floor = std::exp(r.c_beta);
  r.min_margin = kInf;
  for (Index m = 0;; ++m) {
    double md = static_cast<double>(m);
    // integer maximizer m at a = m + (psi(m+1) - ln theta) / beta
    double a = md + (specfun::digamma(md + 1) - std::log(theta)) / beta;
    if (a > a_hi) break;
    if (a < a_lo) continue;
    CounterexampleRow row;
    row.a = a;
    row.u = m;
    row.u_solved = u_of_a(theta, beta, a);
    if (std::abs(row.u_solved - md) > 1e-8 * std::max(1.0, md)) r.root_check = false;
    double lz = log_gauss_poisson_mass(theta, beta, a);
    double lT = -0.5 * beta * (md - a) * (md - a) - lz;
    row.T = std::exp(lT);
    double rad = std::abs(md - a) * (1 + 1e-12) + 1e-12;
    Index n_lo = std::max<Index>(0, static_cast<Index>(std::ceil(a - rad)));
    Index n_hi = static_cast<Index>(std::floor(a + rad));
    std::vector<double> lp;
    for (Index n = n_lo; n <= n_hi; ++n) lp.push_back(discrete::log_poisson_pmf(theta, n));
    double ltail = lp.empty() ? -kInf : log_sum_exp(lp);
    row.log_T = lT;
    row.tail = std::exp(ltail);
    row.product = std::exp(lT + ltail);
    r.min_margin = std::min(r.min_margin, row.product - r.floor);
    if (a >= 4 && md < std::sqrt(a)) r.above_sqrt_a = false;
    // strict concavity of Psi_a on integers
    auto psi = [&](double u) { return -0.5 * beta * (u - a) * (u - a) - std::lgamma(u + 1) + u * std::log(theta) - theta; };
    for (double u = 0; u <= 2 * a + 10; u += 1)
      if (psi(u + 2) - 2 * psi(u + 1) + psi(u) >= 0) r.concave = false;
    r.rows.push_back(row);
  }
  require(r.rows.size() >= min_hits, ErrorKind::Range, "counterexample: too few integer crossings in the a range");
  std::size_t n = r.rows.size();
  for (std::size_t i = n >= 5 ? n - 4 : 1; i < n; ++i)
    if (!(r.rows[i].log_T > r.rows[i - 1].log_T)) r.increasing_tail_T = false;
  return r;
}

namespace {

struct CorpusG {
  std::string name;
  std::function<double(double)> g;
};

std::vector<CorpusG> g_corpus(std::uint64_t seed, std::size_t count) {
  std::vector<CorpusG> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::mt19937_64 rng(seed_derive(seed, "talagrand-g", i));
    std::uniform_real_distribution<double> U(0, 1);
    double m = -2.5 + 5 * U(rng), v = 0.05 + 0.6 * U(rng), m2 = -2.5 + 5 * U(rng), w = U(rng);
    std::ostringstream name;
    name.precision(4);
    switch (i % 3) {
      case 0:
        name << "bump m=" << m << " v=" << v;
        out.push_back({name.str(), [m, v](double x) { return std::exp(-(x - m) * (x - m) / (2 * v)); }});
        break;
      case 1:
        name << "bump-pair m=" << m << "," << m2;
        out.push_back({name.str(), [m, m2, v, w](double x) {
                         return std::exp(-(x - m) * (x - m) / (2 * v)) + w * std::exp(-(x - m2) * (x - m2) / (2 * v));
                       }});
        break;
      default:
        name << "ramp m=" << m;
        out.push_back({name.str(), [m, v](double x) { return 1.0 / (1.0 + std::exp(-(x - m) / std::sqrt(v))); }});
        break;
    }
  }
  return out;
}

// mu_h of {x : linear interpolation of vals >= level} on the grid
double grid_superlevel(const Potential1D& h, double logZ, const std::vector<double>& xs, const std::vector<double>& vals,
                       double level) {
  double m = 0;
  bool in = vals[0] >= level;
  double start = xs[0];
  for (std::size_t i = 1; i < xs.size(); ++i) {
    bool above = vals[i] >= level;
    if (above != in) {
      double x = xs[i - 1] + (level - vals[i - 1]) / (vals[i] - vals[i - 1]) * (xs[i] - xs[i - 1]);
      if (above)
        start = x;
      else
        m += density_mass(h, logZ, start, x);
      in = above;
    }
  }
  if (in) m += density_mass(h, logZ, start, xs.back());
  return m;
}

}  // namespace

DiffusionTalagrand talagrand_diffusion_experiment(const Potential1D& h, double s, const std::vector<double>& t_grid,
                                                  const TalagrandOptions& opt) {
  require(s > 0, ErrorKind::Domain, "talagrand experiment: s must be positive");
  require(h.symmetric, ErrorKind::Unsupported, "talagrand experiment: h must be symmetric");
  for (double t : t_grid) require(t >= 2, ErrorKind::Domain, "talagrand experiment: t must be >= 2");
  DiffusionTalagrand out;
  out.exploratory = !h.v_lower_bound.has_value();
  double D = kNaN;
  if (!out.exploratory) {
    require(h.c > 0, ErrorKind::Precondition, "talagrand experiment: need h'' >= c > 0");
    out.sup_v2 = diffusion::sup_v2(h);
    double cs = specfun::rate_constants(s, 1.0, std::numbers::sqrt2).c_t;
    out.beta = std::max(0.0, cs * cs + 0.5 * (1 - h.c) + 0.5 * out.sup_v2);
    D = (h.C + out.beta) / h.c;
  } else {
    out.sup_v2 = kNaN;
    out.beta = kNaN;
  }
  out.curve.label = "diffusion talagrand " + h.name + (out.exploratory ? " (exploratory)" : "");
  out.curve.envelope = "1/(t sqrt(ln t))";
  out.curve.theory_constant = D;

  double logZ = log_mass(h), R = reach(h);
  bool ou = h.name == "quadratic";
  auto xs = linspace(-opt.x_range, opt.x_range, static_cast<std::size_t>(opt.x_points));
  diffusion::FkOptions fk;
  fk.steps = opt.steps;
  diffusion::OUParams p;

  std::vector<std::vector<double>> values;  // P_s g / int g dmu_h on xs
  auto corpus = g_corpus(opt.seed, opt.corpus_size);
  for (std::size_t gi = 0; gi < corpus.size(); ++gi) {
    const auto& g = corpus[gi].g;
    out.corpus.push_back(corpus[gi].name);
    double brk[] = {0.0};
    double mass = integrate([&](double x) { return g(x) * std::exp(-h.h(x) - logZ); }, -R, R, 1e-15, 1e-11, brk).value;
    std::vector<double> v(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      double pv;
      if (ou) {
        diffusion::Vector x0(1);
        x0[0] = xs[i];
        pv = diffusion::ou_mehler_apply(p, [&](const diffusion::Vector& y) { return g(y[0]); }, s, x0, 120).value;
      } else {
        pv = diffusion::lh_apply(h, g, s, xs[i], opt.n_paths, seed_derive(opt.seed, "lh", gi, i), fk, out.exploratory)
                 .value;
      }
      v[i] = pv / mass;
    }
    values.push_back(std::move(v));
  }
  if (opt.include_spike) {
    out.corpus.push_back("spike y=0.5");
    std::vector<double> v(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
      v[i] = diffusion::lh_kernel(h, s, xs[i], 0.5, opt.n_paths, seed_derive(opt.seed, "spike", i), opt.steps,
                                  out.exploratory)
                 .value;
    values.push_back(std::move(v));
  }

  for (double t : t_grid) {
    double env = talagrand_envelope(t), worst = 0;
    for (const auto& v : values) {
      double tail = grid_superlevel(h, logZ, xs, v, t);
      worst = std::max(worst, tail);
      if (std::isfinite(D) && tail > D * env * (1 + 1e-9)) ++out.violations;
    }
    out.curve.points.push_back({t, worst, std::isfinite(D) ? D * env : kNaN});
    out.curve.fitted_constant = std::max(out.curve.fitted_constant, worst / env);
  }
  if (!std::isfinite(D))
    for (auto& pt : out.curve.points) pt.bound = out.curve.fitted_constant * talagrand_envelope(pt.t);
  return out;
}

}  // namespace semilab::deviation
