#include <doctest.h>

#include <cmath>
#include <numbers>

#include "semilab/error.hpp"
#include "semilab/laguerre.hpp"
#include "semilab/numeric.hpp"

using namespace semilab;
using namespace semilab::laguerre;

namespace {

double nu_integral(double alpha, const std::function<double(double)>& f, double hi = 200) {
  GammaMeasure g{alpha};
  // y = u^2 keeps the density bounded for alpha >= 1/2
  auto q = integrate([&](double u) { return 2 * u * g.density(u * u) * f(u * u); }, 0, std::sqrt(hi), 1e-15, 1e-13);
  return q.value;
}

}  // namespace

TEST_CASE("Gamma measure") {
  for (double alpha : {0.5, 1.0, 1.5, 3.0}) {
    CHECK(nu_integral(alpha, [](double) { return 1.0; }) == doctest::Approx(1.0).epsilon(1e-10));
    GammaMeasure g{alpha};
    double direct = integrate([&](double x) { return g.density(x); }, 2, 5, 0, 1e-13).value;
    CHECK(g.mass(2, 5) == doctest::Approx(direct).epsilon(1e-11));
    CHECK(g.mass(-3, kInf) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(g.mass(5, 2) == 0.0);
  }
  CHECK_THROWS_AS(gamma_measure(0.0), Error);
}

TEST_CASE("Laguerre polynomials") {
  for (double alpha : {0.5, 1.5, 4.0})
    for (double x : {0.3, 2.0, 7.0}) {
      CHECK(laguerre_poly(alpha, 0, x) == 1.0);
      CHECK(laguerre_poly(alpha, 1, x) == doctest::Approx(alpha - x).epsilon(1e-14));
      CHECK(laguerre_poly(alpha, 2, x) ==
            doctest::Approx(alpha * (alpha + 1) / 2 - (alpha + 1) * x + x * x / 2).epsilon(1e-13));
      CHECK(generator_check(alpha, 0, x) == 0.0);
      CHECK(generator_check(alpha, 1, x) < 1e-14);
      for (int k = 2; k <= 10; ++k) {
        double scale = 1;
        for (int j = 0; j <= k; ++j) scale = std::max(scale, std::abs(laguerre_poly(alpha, j, x)));
        CHECK(generator_check(alpha, k, x) < 1e-10 * scale * (k + 1));
      }
    }
  // orthogonality and norms against nu_alpha
  double alpha = 1.5;
  for (int j = 0; j <= 4; ++j)
    for (int k = 0; k <= 4; ++k) {
      double ip = nu_integral(alpha, [&](double x) { return laguerre_poly(alpha, j, x) * laguerre_poly(alpha, k, x); });
      double expect = j == k ? std::exp(std::lgamma(k + alpha) - std::lgamma(k + 1.0) - std::lgamma(alpha)) : 0.0;
      CHECK(std::abs(ip - expect) < 1e-9);
    }
  CHECK_THROWS_AS(laguerre_poly(1.0, 11, 1.0), Error);
}

TEST_CASE("Laguerre kernel") {
  for (double alpha : {0.5, 1.0, 1.5, 3.0})
    for (double t : {0.1, 1.0, 3.0}) {
      auto p = kernel_params(alpha, t);
      CHECK(p.c_t == doctest::Approx(2 * std::exp(t / 2) / (std::exp(t) - 1)).epsilon(1e-14));
      for (double x : {0.01, 1.0, 10.0}) {
        double y = 0.7 * x + 0.3;
        CHECK(std::abs(log_kernel(p, x, y) - log_kernel(p, y, x)) < 1e-12);
        double m = nu_integral(alpha, [&](double y) { return laguerre_kernel(p, x, y); }, 300);
        CHECK(m == doctest::Approx(1.0).epsilon(1e-8));
        CHECK(laguerre_apply(alpha, [](double) { return 1.0; }, t, x) == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(log_kernel(p, x, 1e-13) == doctest::Approx(log_kernel(p, x, 0.0)).epsilon(1e-9));
      }
    }
  // alpha = 3/2 through I_{1/2}(z) = sqrt(2/(pi z)) sinh z
  for (double t : {0.2, 1.0, 4.0})
    for (double x : {0.1, 1.0, 5.0})
      for (double y : {0.05, 2.0, 9.0}) {
        auto p = kernel_params(1.5, t);
        double em1 = std::expm1(t), z = 2 * std::sqrt(x * y * std::exp(t)) / em1;
        double i12 = std::sqrt(2 / (std::numbers::pi * z)) * std::sinh(z);
        double G = std::tgamma(1.5) * std::exp(t) / em1 * std::pow(std::exp(t) / (x * y), 0.25) * std::exp(-(x + y) / em1) * i12;
        CHECK(laguerre_kernel(p, x, y) == doctest::Approx(G).epsilon(1e-10));
      }
  CHECK_THROWS_AS(kernel_params(1.0, 0.0), Error);
}

TEST_CASE("Laguerre semigroup action") {
  for (double alpha : {0.5, 1.5, 3.0})
    for (double t : {0.2, 1.0, 2.5})
      for (int k = 1; k <= 3; ++k)
        for (double x : {0.05, 0.8, 3.3, 12.0}) {
          auto q = [&](double y) { return laguerre_poly(alpha, k, y); };
          double got = laguerre_apply(alpha, q, t, x);
          double expect = std::exp(-k * t) * q(x);
          CHECK(std::abs(got - expect) < 1e-6 * std::max(std::abs(q(x)), 1e-2));
        }
  // Chapman-Kolmogorov
  auto f = [](double y) { return 1 / (1 + y); };
  for (double alpha : {0.5, 2.0})
    for (double x : {0.3, 4.0}) {
      double t = 0.4;
      auto inner = [&](double y) { return laguerre_apply(alpha, f, t, y, {0.0, 0.0, 1e-10}); };
      double twice = laguerre_apply(alpha, inner, t, x, {0.0, 0.0, 1e-9});
      CHECK(twice == doctest::Approx(laguerre_apply(alpha, f, 2 * t, x)).epsilon(1e-6));
    }
  CHECK_THROWS_AS(laguerre_apply(1.0, f, 1.0, 1.0, {1.0}), Error);
}

TEST_CASE("alpha = 3/2 log-Hessian") {
  CHECK(log_hess_32_scalar(0.0) == 0.0);
  for (double z : {0.0999999, 0.1}) {
    double direct = 2 - z * z / std::pow(std::sinh(z), 2) - z / std::tanh(z);
    CHECK(log_hess_32_scalar(z) == doctest::Approx(direct).epsilon(1e-8));
  }
  double z = 10;
  CHECK(log_hess_32_scalar(z) == doctest::Approx(2 - 100 / std::pow(std::sinh(10.0), 2) - 10 / std::tanh(10.0)).epsilon(1e-15));
  CHECK(log_hess_32_scalar(z) / 4 == doctest::Approx(-2.0).epsilon(1e-6));
  CHECK(log_hess_32_scalar(800.0) == doctest::Approx(-798.0).epsilon(1e-15));

  // against central differences of ln G
  double worst = 0;
  for (double t : {0.5, 1.0, 2.0}) {
    auto p = kernel_params(1.5, t);
    for (double x : linspace(0.1, 10, 12))
      for (double y : linspace(0.1, 10, 12)) {
        double h = 3e-2 * x;
        auto l = [&](double u) { return log_kernel(p, u, y); };
        double fd = (-l(x + 2 * h) + 16 * l(x + h) - 30 * l(x) + 16 * l(x - h) - l(x - 2 * h)) / (12 * h * h);
        double cf = log_hess_32(t, x, y);
        worst = std::max(worst, std::abs(fd - cf) / std::abs(cf));
      }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("log-Hessian is unbounded below") {
  auto r = log_hess_unboundedness(1.0, linspace(0.1, 10, 25), logspace(1, 1e4, 60));
  CHECK(r.min_value < -1e3);
  CHECK(r.max_value <= 0);
  CHECK(r.monotone_in_y);
  CHECK(r.argmin_x == doctest::Approx(0.1));
  auto big = log_hess_unboundedness(1.0, {0.1, 1.0, 10.0}, logspace(1, 1e6, 30));
  for (double q : big.asymptotic_ratio) CHECK(q == doctest::Approx(1.0).epsilon(5e-3));
  auto small = log_hess_unboundedness(0.3, linspace(0.01, 1, 20), logspace(1e-6, 1, 20));
  CHECK(small.max_value <= 0);
}

TEST_CASE("Gamma counterexample") {
  // alpha = 1: int e^{-beta/2 (x-a)^2 - x} dx in closed form
  for (double beta : {0.5, 1.0, 3.0})
    for (double a : {0.5, 5.0, 30.0}) {
      double m = a - 1 / beta;
      double I = std::exp(-a + 1 / (2 * beta)) * std::sqrt(2 * std::numbers::pi / beta) * 0.5 *
                 std::erfc(-m * std::sqrt(beta) / std::numbers::sqrt2);
      CHECK(gamma_gauss_log_norm(1.0, beta, a) == doctest::Approx(-std::log(I)).epsilon(1e-11));
    }
  for (double alpha : {0.5, 3.0}) {
    double a = 7, beta = 2;
    double I = nu_integral(alpha, [&](double x) { return std::exp(-beta / 2 * (x - a) * (x - a)); });
    CHECK(gamma_gauss_log_norm(alpha, beta, a) == doctest::Approx(-std::log(I)).epsilon(1e-10));
  }
  auto as = linspace(10, 50, 81);
  for (double alpha : {1.0, 1.5})
    for (double beta : {0.5, 1.0, 4.0}) {
      auto r = gamma_counterexample(alpha, beta, as);
      CHECK(r.floor > 0.05);
      CHECK(r.min_radius >= 1 - 1e-12);
      CHECK(r.min_window_ratio > 0.5);
      CHECK(r.c_fit == doctest::Approx(std::sqrt(2 * std::numbers::pi / beta) * std::exp(0.5 / beta)).epsilon(0.1));
      for (auto& row : r.rows) {
        double lt = row.log_t;
        double fa_lo = -beta / 2 * row.radius * row.radius + row.Z;
        CHECK(fa_lo == doctest::Approx(lt).epsilon(1e-12));
        CHECK(row.tail >= row.window_ratio * std::exp(GammaMeasure{alpha}.log_density(row.a)) * (1 - 1e-12));
      }
    }
  CHECK_THROWS_AS(gamma_counterexample(1.0, 0.0, as), Error);
}

TEST_CASE("sup of the Laguerre kernel") {
  for (double alpha : {0.5, 1.5, 3.0})
    for (double s : {0.5, 1.0})
      for (double x : {0.01, 0.5, 3.0, 15.0}) {
        auto sk = sup_kernel(alpha, s, x);
        auto p = kernel_params(alpha, s);
        double brute = log_kernel(p, x, 0.0);
        for (double ly : linspace(std::log(1e-9), std::log(20 * x * std::exp(s) + 100), 20001))
          brute = std::max(brute, log_kernel(p, x, std::exp(ly)));
        CHECK(sk.log_value >= brute - 1e-12);
        CHECK(sk.log_value <= brute + 1e-4);
        if (x >= 15) CHECK(sk.y_star == doctest::Approx(x * std::exp(s)).epsilon(0.15));
      }
  // a normalized bump at y* gives P_s f(x) close to the sup, and never above it
  double alpha = 1.5, s = 1, x = 4;
  auto sk = sup_kernel(alpha, s, x);
  auto p = kernel_params(alpha, s);
  GammaMeasure g{alpha};
  for (double eps : {0.05, 0.01}) {
    double w = eps * sk.y_star;
    auto bump = [&](double y) { return std::exp(-0.5 * (y - sk.y_star) * (y - sk.y_star) / (w * w)); };
    double lo = sk.y_star - 10 * w, hi = sk.y_star + 10 * w;
    double norm = integrate([&](double y) { return bump(y) * g.density(y); }, lo, hi, 0, 1e-12).value;
    double pf = integrate([&](double y) { return laguerre_kernel(p, x, y) * bump(y) * g.density(y); }, lo, hi, 0, 1e-12).value / norm;
    CHECK(pf <= std::exp(sk.log_value) * (1 + 1e-10));
    CHECK(pf >= std::exp(sk.log_value) * (1 - 20 * eps * eps));
  }
}

TEST_CASE("Laguerre Talagrand tail") {
  auto ts = logspace(1.05, 1e8, 30);
  for (double alpha : {0.5, 1.0, 1.5, 3.0}) {
    auto r = laguerre_talagrand_tail(alpha, 1.0, ts);
    CHECK(std::isfinite(r.curve.fitted_constant));
    CHECK(r.curve.fitted_constant > 0);
    for (std::size_t i = 0; i < r.curve.points.size(); ++i) {
      auto& pt = r.curve.points[i];
      CHECK(pt.tail <= pt.bound * (1 + 1e-12));
      if (i > 0) CHECK(pt.tail <= r.curve.points[i - 1].tail);
    }
    // the scaled tail settles rather than drifting upward
    auto& pts = r.curve.points;
    auto ratio = [&](std::size_t i) { return pts[i].tail * pts[i].t * std::sqrt(std::log(pts[i].t)); };
    CHECK(ratio(pts.size() - 1) <= 1.2 * ratio(pts.size() - 8));

    // direct superlevel measure at one level from a dense x scan
    double t = 1e5, lt = std::log(t);
    GammaMeasure g{alpha};
    auto xs = linspace(0.01, 60, 6000);
    double m = 0;
    for (std::size_t i = 1; i < xs.size(); ++i) {
      double xm = 0.5 * (xs[i - 1] + xs[i]);
      if (sup_kernel(alpha, 1.0, xm).log_value >= lt) m += g.mass(xs[i - 1], xs[i]);
    }
    m += g.mass(60, kInf);
    auto one = laguerre_talagrand_tail(alpha, 1.0, {t});
    CHECK(one.curve.points[0].tail == doctest::Approx(m).epsilon(0.02));
  }
  CHECK_THROWS_AS(laguerre_talagrand_tail(1.0, 1.0, {1.0}), Error);
}
