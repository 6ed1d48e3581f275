#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "semilab/diffusion.hpp"
#include "semilab/error.hpp"
#include "semilab/numeric.hpp"
#include "semilab/seed.hpp"
#include "semilab/specfun.hpp"

using namespace semilab;
using namespace semilab::diffusion;

namespace {

const double kSqrt2 = std::numbers::sqrt2;

Vector vec1(double x) {
  Vector v(1);
  v[0] = x;
  return v;
}

// ln P_t^V f and its x-derivatives for V = x^2/4 - 1/2 under OU(1, sqrt 2), f = exp(-(y-m)^2/(2v))
struct QuadFk {
  double log_value, grad, hess;
};

QuadFk quad_fk(double x, double t, double m, double v) {
  double w = 1 - kSqrt2, kappa = 1 - kSqrt2 / 2, ap = kSqrt2;
  double s2 = -std::expm1(-2 * ap * t) / ap;
  double P = 1 / v + w / 2, B = m / v, e = std::exp(-ap * t), mu = e * x;
  double den = 1 + P * s2;
  double logE = -0.5 * std::log(den) - P * mu * mu / 2 + B * mu - m * m / (2 * v) +
                s2 * (B - P * mu) * (B - P * mu) / (2 * den);
  QuadFk q;
  q.log_value = w * x * x / 4 + kappa * t + logE;
  q.grad = w * x / 2 + e * (B - P * mu) / den;
  q.hess = w / 2 - e * e * P / den;
  return q;
}

Potential quad_potential() { return Potential::quadratic(0.5, -0.5, 1); }

// V = 0, OU(1, sqrt 2), Gaussian f: exact log-derivatives
QuadFk free_fk(double x, double t, double m, double v) {
  double s2 = -std::expm1(-2 * t), e = std::exp(-t), P = 1 / v, B = m / v, mu = e * x, den = 1 + P * s2;
  QuadFk q;
  q.log_value = -0.5 * std::log(den) - P * mu * mu / 2 + B * mu - m * m / (2 * v) + s2 * (B - P * mu) * (B - P * mu) / (2 * den);
  q.grad = e * (B - P * mu) / den;
  q.hess = -e * e * P / den;
  return q;
}

}  // namespace

TEST_CASE("parameters and grids") {
  CHECK_THROWS_AS(ou_params(0.0, 1.0), Error);
  CHECK_THROWS_AS(ou_params(1.0, -1.0), Error);
  auto g = uniform_grid(2.0, 8);
  CHECK(g.size() == 9);
  CHECK(g.back() == 2.0);
  CHECK_NOTHROW(validate_grid(g, 2.0));
  CHECK_THROWS_AS(validate_grid({0.0, 1.0, 1.0, 2.0}, 2.0), Error);
  CHECK_THROWS_AS(validate_grid({0.1, 2.0}, 2.0), Error);
  OUParams p;
  CHECK(alpha_t(p, 1.3, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(alpha_t(p, 1.3, 1.3) == 0.0);
  CHECK(alpha_t(p, 1.3, 0.4) == doctest::Approx(std::sinh(0.9) / std::sinh(1.3)).epsilon(1e-14));
  CHECK(mehler_sd(p, 0.7) == doctest::Approx(std::sqrt(1 - std::exp(-1.4))).epsilon(1e-14));
}

TEST_CASE("closed-form quadratic Feynman-Kac solves the backward equation") {
  // u_t = u'' - x u' - V u with u = exp(log_value)
  double m = 0.4, v = 2.0;
  for (double x : {-1.0, 0.3, 1.7})
    for (double t : {0.3, 1.0, 2.5}) {
      auto q = quad_fk(x, t, m, v);
      double ht = 1e-5, hx = 1e-4;
      double ut = (std::exp(quad_fk(x, t + ht, m, v).log_value) - std::exp(quad_fk(x, t - ht, m, v).log_value)) / (2 * ht);
      double u = std::exp(q.log_value);
      double up = std::exp(quad_fk(x + hx, t, m, v).log_value), um = std::exp(quad_fk(x - hx, t, m, v).log_value);
      double ux = (up - um) / (2 * hx), uxx = (up - 2 * u + um) / (hx * hx);
      double V = x * x / 4 - 0.5;
      CHECK(std::abs(ut - (uxx - x * ux - V * u)) < 1e-5 * (1 + std::abs(u)));
      CHECK(q.grad == doctest::Approx((quad_fk(x + hx, t, m, v).log_value - quad_fk(x - hx, t, m, v).log_value) / (2 * hx)).epsilon(1e-7));
    }
  // t -> 0 recovers f
  CHECK(quad_fk(0.8, 1e-9, m, v).log_value == doctest::Approx(-(0.8 - m) * (0.8 - m) / (2 * v)).epsilon(1e-7));
}

TEST_CASE("Mehler quadrature moments") {
  OUParams p = ou_params(0.7, 1.3);
  double t = 0.9, x = 1.4, e = std::exp(-0.7 * t), sd = mehler_sd(p, t);
  auto one = ou_mehler_apply(p, [](const Vector&) { return 1.0; }, t, vec1(x));
  CHECK(one.value == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_FALSE(one.growth_warning);
  CHECK(ou_mehler_apply(p, [](const Vector& y) { return y[0]; }, t, vec1(x)).value == doctest::Approx(e * x).epsilon(1e-13));
  CHECK(ou_mehler_apply(p, [](const Vector& y) { return y[0] * y[0]; }, t, vec1(x)).value ==
        doctest::Approx(e * e * x * x + sd * sd).epsilon(1e-13));
  OUParams p2 = ou_params(1.0, kSqrt2, 2);
  Vector x2(2);
  x2 << 0.5, -1.0;
  auto prod = ou_mehler_apply(p2, [](const Vector& y) { return y[0] * y[1]; }, 1.0, x2);
  CHECK(prod.value == doctest::Approx(std::exp(-2.0) * 0.5 * -1.0).epsilon(1e-12));
  auto wild = ou_mehler_apply(p, [](const Vector& y) { return std::exp(y[0] * y[0]); }, 3.0, vec1(0.0), 20);
  CHECK(wild.growth_warning);
  OUParams p3 = ou_params(1.0, 1.0, 3);
  CHECK_THROWS_AS(ou_mehler_apply(p3, [](const Vector&) { return 1.0; }, 1.0, Vector::Zero(3)), Error);
}

TEST_CASE("OU log-derivatives: Hermite moments against finite differences and the -c_t^2 floor") {
  OUParams p;
  std::mt19937_64 rng(seed_derive(17, "ou-corpus"));
  std::uniform_real_distribution<double> U(0, 1);
  int violations = 0;
  for (int i = 0; i < 100; ++i) {
    // positive mixtures of two Gaussian bumps plus a floor
    double m1 = -3 + 6 * U(rng), m2 = -3 + 6 * U(rng), v1 = 0.3 + 2 * U(rng), v2 = 0.3 + 2 * U(rng);
    double c1 = U(rng), c2 = U(rng), floor = 1e-3 * U(rng);
    auto g = [=](double y) {
      return c1 * std::exp(-(y - m1) * (y - m1) / (2 * v1)) + c2 * std::exp(-(y - m2) * (y - m2) / (2 * v2)) + floor;
    };
    for (double t : {0.3, 1.0, 3.0}) {
      double ct = specfun::rate_constants(t, 1.0, kSqrt2).c_t;
      for (double x = -3; x <= 3; x += 0.75) {
        double u2 = ou_log_derivative(p, g, t, x, 2);
        if (u2 < -ct * ct - 1e-10) ++violations;
      }
    }
    if (i < 5) {
      double t = 0.8, x = 0.37, h = 1e-4;
      auto lp = [&](double z) { return std::log(ou_mehler_apply(p, [&](const Vector& y) { return g(y[0]); }, t, vec1(z), 160).value); };
      double fd1 = (lp(x + h) - lp(x - h)) / (2 * h), fd2 = (lp(x + h) - 2 * lp(x) + lp(x - h)) / (h * h);
      CHECK(ou_log_derivative(p, g, t, x, 1) == doctest::Approx(fd1).epsilon(1e-6));
      CHECK(std::abs(ou_log_derivative(p, g, t, x, 2) - fd2) < 1e-4);
    }
  }
  CHECK(violations == 0);
  // Gaussian g: exact
  auto ex = free_fk(0.5, 1.2, 0.3, 0.8);
  auto g = [](double y) { return std::exp(-(y - 0.3) * (y - 0.3) / 1.6); };
  CHECK(ou_log_derivative(p, g, 1.2, 0.5, 1) == doctest::Approx(ex.grad).epsilon(1e-12));
  CHECK(ou_log_derivative(p, g, 1.2, 0.5, 2) == doctest::Approx(ex.hess).epsilon(1e-11));
  CHECK_THROWS_AS(ou_log_derivative(p, g, 1.0, 0.0, 3), Error);
}

TEST_CASE("Feynman-Kac values") {
  OUParams p;
  auto one = TestFn::constant(1.0);
  auto e0 = feynman_kac_apply(p, Potential::zero(), one, 1.0, vec1(0.3), 1000, 5);
  CHECK(e0.value == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(e0.std_error < 1e-14);

  auto bump = TestFn::gaussian_bump(vec1(0.4), 2.0);
  double t = 0.8, x = 0.6;
  auto ec = feynman_kac_apply(p, Potential::constant(0.7), bump, t, vec1(x), 20000, 6);
  double exact_c = std::exp(-0.7 * t) * ou_mehler_apply(p, [&](const Vector& y) { return bump(y); }, t, vec1(x)).value;
  CHECK(std::abs(ec.value - exact_c) < 3 * ec.std_error);

  std::uint64_t label = 0;
  for (double xx : {-1.0, 0.7, 2.0})
    for (double tt : {0.5, 1.5}) {
      auto e = feynman_kac_apply(p, quad_potential(), bump, tt, vec1(xx), 40000, seed_derive(7, ++label));
      double exact = std::exp(quad_fk(xx, tt, 0.4, 2.0).log_value);
      CHECK(std::abs(e.value - exact) < 3 * e.std_error);
      CHECK(e.rejected == 0);
    }

  // the batch simulator replays the same paths
  auto grid = uniform_grid(1.0, 32);
  auto batch = simulate_fk_batch(p, quad_potential(), bump, 1.0, vec1(0.2), 300, grid, 11);
  double mean = 0;
  for (std::size_t i = 0; i < batch.n_paths; ++i) mean += batch.terminal_f[i] * std::exp(batch.log_weights[i]);
  mean /= batch.n_paths;
  auto fk = feynman_kac_apply(p, quad_potential(), bump, 1.0, vec1(0.2), 300, grid, 11);
  CHECK(fk.value == doctest::Approx(mean).epsilon(1e-12));
  CHECK(batch.states[0].cols() == 33);
  CHECK(batch.states[0](0, 0) == 0.2);

  // chunking is deterministic and independent of the worker count
  FkOptions one_thread, four_threads;
  one_thread.threads = 1;
  one_thread.chunk_paths = 500;
  four_threads.threads = 4;
  four_threads.chunk_paths = 500;
  auto a = feynman_kac_apply(p, quad_potential(), bump, 1.0, vec1(0.2), 3000, 12, one_thread);
  auto b = feynman_kac_apply(p, quad_potential(), bump, 1.0, vec1(0.2), 3000, 12, four_threads);
  CHECK(a.value == b.value);
  CHECK(a.std_error == b.std_error);
}

TEST_CASE("Feynman-Kac: non-finite weights are rejected") {
  OUParams p;
  Potential bad = Potential::from_1d([](double x) { return x > 0.5 ? kNaN : 0.0; }, [](double) { return 0.0; },
                                     [](double) { return 0.0; }, 0.0, "bad");
  CHECK_THROWS_AS(feynman_kac_apply(p, bad, TestFn::constant(1.0), 1.0, vec1(0.0), 2000, 3), Error);
  Potential rare = Potential::from_1d([](double x) { return x > 6.0 ? kNaN : 0.0; }, [](double) { return 0.0; },
                                      [](double) { return 0.0; }, 0.0, "rare");
  auto e = feynman_kac_apply(p, rare, TestFn::constant(1.0), 1.0, vec1(0.0), 2000, 3);
  CHECK(e.value == doctest::Approx(1.0));
}

TEST_CASE("time-grid refinement with shared noise") {
  // fine exact OU path; coarse trapezoid uses every other node
  OUParams p;
  auto V = quad_potential();
  auto bump = TestFn::gaussian_bump(vec1(0.4), 2.0);
  double t = 1.0;
  int M = 32;
  auto fine = uniform_grid(t, 2 * M);
  const std::size_t n = 20000;
  std::vector<double> wf(n), wc(n);
  for (std::size_t i = 0; i < n; ++i) {
    Matrix path = sample_ou_path(p, vec1(0.7), fine, seed_derive(99, i));
    double lf = 0, lc = 0, h = t / (2 * M);
    for (int k = 0; k <= 2 * M; ++k) {
      double v = V(path.data() + k);
      lf -= ((k == 0 || k == 2 * M) ? 0.5 : 1.0) * h * v;
      if (k % 2 == 0) lc -= ((k == 0 || k == 2 * M) ? 0.5 : 1.0) * 2 * h * v;
    }
    double fv = bump(path.col(2 * M));
    wf[i] = fv * std::exp(lf);
    wc[i] = fv * std::exp(lc);
  }
  double mf = 0, mc = 0, ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mf += wf[i];
    mc += wc[i];
  }
  mf /= n;
  mc /= n;
  for (double v : wf) ss += (v - mf) * (v - mf);
  double se = std::sqrt(ss / (n - 1) / n);
  CHECK(std::abs(mf - mc) < se);
  CHECK(std::abs(mf - std::exp(quad_fk(0.7, t, 0.4, 2.0).log_value)) < 3 * se);
}

TEST_CASE("A statistic") {
  OUParams p = ou_params(0.8, 1.1);
  double t = 1.5, x = 0.9;
  int M = 4000;
  auto grid = uniform_grid(t, M);
  Matrix frozen = Matrix::Constant(1, M + 1, x);
  auto linear = Potential::from_1d([](double y) { return y; }, [](double) { return 1.0; }, [](double) { return 0.0; }, -kInf, "linear");
  Vector A = a_statistic(p, linear, frozen, grid, vec1(x));
  double a = p.a;
  double int_alpha = (std::cosh(a * t) - 1) / (a * std::sinh(a * t));
  double dt = specfun::rate_constants(t, a, p.sigma).d_t;
  double exact = -int_alpha + dt * (x - std::exp(-a * t) * x);
  CHECK(A[0] == doctest::Approx(exact).epsilon(1e-7));

  // V = 0: mean of A vanishes
  auto batch = simulate_fk_batch(p, Potential::zero(), TestFn::constant(1.0), t, vec1(x), 4000, uniform_grid(t, 16), 21);
  double m = 0, ss = 0;
  for (auto& v : batch.a_stat) m += v[0];
  m /= batch.n_paths;
  for (auto& v : batch.a_stat) ss += (v[0] - m) * (v[0] - m);
  CHECK(std::abs(m) < 3 * std::sqrt(ss / (batch.n_paths - 1) / batch.n_paths));
}

TEST_CASE("log-gradient estimator") {
  OUParams p;
  auto g0 = grad_log_fk(p, Potential::zero(), TestFn::constant(1.0), 1.0, vec1(0.5), 20000, 31);
  CHECK(std::abs(g0.value[0]) < 3 * g0.std_error[0]);

  auto bump = TestFn::gaussian_bump(vec1(0.3), 0.8);
  double t = 1.2, x = 0.5;
  auto g1 = grad_log_fk(p, Potential::zero(), bump, t, vec1(x), 40000, 32);
  double ref = ou_log_derivative(p, [&](double y) { return bump(vec1(y)); }, t, x, 1);
  CHECK(std::abs(g1.value[0] - ref) < 3 * g1.std_error[0]);

  auto V = quad_potential();
  auto gb = TestFn::gaussian_bump(vec1(0.4), 2.0);
  auto mc = grad_log_fk(p, V, gb, 1.0, vec1(0.7), 100000, 33);
  auto fd = fd_log_derivatives(p, V, gb, 1.0, vec1(0.7), 100000, 34, true, false);
  double comb = std::hypot(mc.std_error[0], fd.grad_se[0]);
  CHECK(std::abs(mc.value[0] - fd.grad[0]) < 3 * comb);
  CHECK(std::abs(mc.value[0] - quad_fk(0.7, 1.0, 0.4, 2.0).grad) < 3 * mc.std_error[0]);
  CHECK(std::abs(fd.grad[0] - quad_fk(0.7, 1.0, 0.4, 2.0).grad) < 3 * fd.grad_se[0] + 1e-6);
}

TEST_CASE("log-Hessian estimator against the Hermite and closed-form oracles") {
  OUParams p;
  auto h0 = hess_log_fk(p, Potential::zero(), TestFn::constant(1.0), 0.7, vec1(0.2), 20000, 41);
  CHECK(std::abs(h0.value(0, 0)) < 3 * h0.std_error(0, 0));

  auto bump = TestFn::gaussian_bump(vec1(-0.2), 0.5);
  std::uint64_t label = 0;
  for (double t : {0.4, 1.0, 2.0}) {
    double x = 0.8;
    auto h = hess_log_fk(p, Potential::zero(), bump, t, vec1(x), 40000, seed_derive(42, ++label));
    double ref = ou_log_derivative(p, [&](double y) { return bump(vec1(y)); }, t, x, 2);
    CHECK(std::abs(h.value(0, 0) - ref) < 3 * h.std_error(0, 0));
  }

  auto V = quad_potential();
  auto gb = TestFn::gaussian_bump(vec1(0.4), 2.0);
  for (double x : {-0.5, 1.2}) {
    ++label;
    auto h = hess_log_fk(p, V, gb, 1.0, vec1(x), 100000, seed_derive(43, label));
    CHECK(std::abs(h.value(0, 0) - quad_fk(x, 1.0, 0.4, 2.0).hess) < 3 * h.std_error(0, 0));
    auto fd = fd_log_derivatives(p, V, gb, 1.0, vec1(x), 100000, seed_derive(44, label), false, true);
    double comb = std::hypot(h.std_error(0, 0), fd.hess_se(0, 0));
    CHECK(std::abs(h.value(0, 0) - fd.hess(0, 0)) < 3 * (comb + fd.hess_richardson(0, 0)));
  }
}

TEST_CASE("standard error halves when the path count quadruples") {
  OUParams p;
  auto V = quad_potential();
  auto gb = TestFn::gaussian_bump(vec1(0.4), 2.0);
  auto a = hess_log_fk(p, V, gb, 1.0, vec1(0.3), 20000, 51);
  auto b = hess_log_fk(p, V, gb, 1.0, vec1(0.3), 80000, 52);
  double r = a.std_error(0, 0) / b.std_error(0, 0);
  CHECK(r > 2 * 0.8);
  CHECK(r < 2 * 1.2);
  auto ga = grad_log_fk(p, V, gb, 1.0, vec1(0.3), 20000, 53);
  auto gbb = grad_log_fk(p, V, gb, 1.0, vec1(0.3), 80000, 54);
  double rg = ga.std_error[0] / gbb.std_error[0];
  CHECK(rg > 1.6);
  CHECK(rg < 2.4);
}

TEST_CASE("alternative Hessian estimator") {
  OUParams p;
  // V = 0, Gaussian f: the Hess log f term is the constant -e^{-2t}/v
  double v = 0.9, t = 0.6, x = 0.4;
  auto gb = TestFn::gaussian_bump(vec1(0.1), v);
  auto alt = hess_log_fk_alt(p, Potential::zero(), gb, t, vec1(x), 40000, 61);
  CHECK(std::abs(alt.value(0, 0) - free_fk(x, t, 0.1, v).hess) < 3 * alt.std_error(0, 0));
  auto z = hess_log_fk_alt(p, Potential::zero(), TestFn::constant(1.0), t, vec1(x), 1000, 62);
  CHECK(z.value(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(hess_log_fk_alt(p, Potential::zero(), TestFn::from_1d([](double) { return 1.0; }), t, vec1(x), 100, 1), Error);

  auto V = quad_potential();
  auto bump = TestFn::gaussian_bump(vec1(0.4), 2.0);
  std::mt19937_64 rng(63);
  std::uniform_real_distribution<double> U(0, 1);
  for (int i = 0; i < 5; ++i) {
    double xx = -1.5 + 3 * U(rng), tt = 0.3 + 2 * U(rng);
    auto m = hess_log_fk(p, V, bump, tt, vec1(xx), 40000, seed_derive(64, i));
    auto a = hess_log_fk_alt(p, V, bump, tt, vec1(xx), 40000, seed_derive(65, i));
    CHECK(std::abs(m.value(0, 0) - a.value(0, 0)) < 3 * std::hypot(m.std_error(0, 0), a.std_error(0, 0)));
    CHECK(std::abs(a.value(0, 0) - quad_fk(xx, tt, 0.4, 2.0).hess) < 3 * a.std_error(0, 0));
  }
}

TEST_CASE("dimension two smoke test") {
  OUParams p = ou_params(1.0, kSqrt2, 2);
  auto V = Potential::quadratic(0.5, -1.0, 2);
  Vector c(2), x(2);
  c << 0.4, 0.4;
  x << 0.7, -0.3;
  auto f = TestFn::gaussian_bump(c, 2.0);
  double t = 1.0;
  auto h = hess_log_fk(p, V, f, t, x, 40000, 71);
  CHECK(std::abs(h.value(0, 0) - quad_fk(0.7, t, 0.4, 2.0).hess) < 3 * h.std_error(0, 0));
  CHECK(std::abs(h.value(1, 1) - quad_fk(-0.3, t, 0.4, 2.0).hess) < 3 * h.std_error(1, 1));
  CHECK(std::abs(h.value(0, 1)) < 3 * h.std_error(0, 1));
  auto fd = fd_log_derivatives(p, V, f, t, x, 20000, 72);
  CHECK(std::abs(fd.hess(0, 1)) < 3 * fd.hess_se(0, 1) + 1e-6);
  CHECK(std::abs(fd.grad[1] - quad_fk(-0.3, t, 0.4, 2.0).grad) < 3 * fd.grad_se[1] + 1e-6);
  auto e = feynman_kac_apply(p, V, f, t, x, 20000, 73);
  double exact = std::exp(quad_fk(0.7, t, 0.4, 2.0).log_value + quad_fk(-0.3, t, 0.4, 2.0).log_value);
  CHECK(std::abs(e.value - exact) < 3 * e.std_error);
}

TEST_CASE("OU bridge") {
  OUParams p;
  double t = 1.3;
  auto grid = uniform_grid(t, 50);
  grid.pop_back();
  double worst = 0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    Matrix bx = sample_ou_bridge(p, vec1(0.9), vec1(-0.4), t, grid, i);
    Matrix b0 = sample_ou_bridge(p, vec1(0.0), vec1(-0.4), t, grid, i);
    REQUIRE(bx.cols() == 51);
    CHECK(bx(0, 50) == -0.4);
    for (int k = 0; k < 51; ++k) {
      double s = k < 50 ? grid[k] : t;
      worst = std::max(worst, std::abs(bx(0, k) - b0(0, k) - alpha_t(p, t, s) * 0.9));
    }
  }
  CHECK(worst < 1e-12);

  int k = 20;
  double s = grid[k];
  auto [mean, var] = ou_bridge_moments(p, 0.9, -0.4, t, s);
  const int n = 20000;
  double m = 0, m2 = 0;
  for (int i = 0; i < n; ++i) {
    double b = sample_ou_bridge(p, vec1(0.9), vec1(-0.4), t, grid, seed_derive(81, i))(0, k);
    m += b;
    m2 += b * b;
  }
  m /= n;
  double sv = m2 / n - m * m;
  CHECK(std::abs(m - mean) < 3 * std::sqrt(var / n));
  CHECK(sv == doctest::Approx(var).epsilon(0.05));
}

TEST_CASE("h-transform") {
  auto q = h_transform(Potential1D::quadratic());
  for (double x : {-2.0, 0.0, 1.5}) {
    CHECK(q.W(x) == 0.0);
    CHECK(q.V(x) == 0.0);
    CHECK(q.d2V(x) == 0.0);
  }
  CHECK(q.potential.is_zero);

  auto h1 = Potential1D::perturbed(1.0);
  CHECK(h1.c == doctest::Approx(1.0));
  CHECK(h1.C == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(*h1.v_lower_bound == doctest::Approx(-0.5).epsilon(1e-6));
  auto T = h_transform(h1);
  // derivatives of h and V against differences
  for (double x : {-2.3, -0.4, 0.0, 0.9, 3.1}) {
    double e = 1e-4;
    CHECK(h1.d1(x) == doctest::Approx((h1.h(x + e) - h1.h(x - e)) / (2 * e)).epsilon(1e-7));
    CHECK(h1.d2(x) == doctest::Approx((h1.d1(x + e) - h1.d1(x - e)) / (2 * e)).epsilon(1e-7));
    CHECK(h1.d3(x) == doctest::Approx((h1.d2(x + e) - h1.d2(x - e)) / (2 * e)).epsilon(1e-6));
    CHECK(std::abs(h1.d4(x) - (h1.d3(x + e) - h1.d3(x - e)) / (2 * e)) < 1e-6);
    CHECK(std::abs(T.dV(x) - (T.V(x + e) - T.V(x - e)) / (2 * e)) < 1e-7);
    CHECK(std::abs(T.d2V(x) - (T.dV(x + e) - T.dV(x - e)) / (2 * e)) < 1e-7);
  }
  for (double p : {0.5, 1.5, 2.0}) {
    auto hp = Potential1D::perturbed(p);
    for (double x : {-1.7, 0.6, 2.2}) {
      double e = 1e-4;
      CHECK(std::abs(hp.d3(x) - (hp.d2(x + e) - hp.d2(x - e)) / (2 * e)) < 1e-6);
      CHECK(std::abs(hp.d4(x) - (hp.d3(x + e) - hp.d3(x - e)) / (2 * e)) < 1e-6);
    }
  }
  CHECK_NOTHROW(check_admissible(h1, 0.0));
  CHECK(sup_v2(h1) == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(sup_v2(Potential1D::quadratic()) == 0.0);
  auto hc = Potential1D::cosine();
  CHECK_THROWS_AS(check_admissible(hc, 0.0), Error);
  CHECK_THROWS_AS(sup_v2(hc), Error);
  CHECK_THROWS_AS(lh_apply(hc, [](double) { return 1.0; }, 1.0, 0.0, 100, 1), Error);
  CHECK_THROWS_AS(Potential1D::perturbed(3.0), Error);
  // normalizer
  CHECK(log_normalizer(Potential1D::quadratic()) == doctest::Approx(0.5 * std::log(2 * std::numbers::pi)).epsilon(1e-13));
}

TEST_CASE("L_h semigroup by intertwining") {
  auto h1 = Potential1D::perturbed(1.0);
  for (double x : {0.0, 1.3}) {
    auto e = lh_apply(h1, [](double) { return 1.0; }, 1.0, x, 20000, seed_derive(91, x > 0 ? 1 : 0));
    CHECK(std::abs(e.value - 1.0) < 3 * e.std_error);
  }
  // quadratic h is the OU semigroup itself
  auto q = Potential1D::quadratic();
  auto g = [](double y) { return 1.0 / (1.0 + y * y); };
  auto e = lh_apply(q, g, 0.7, 0.4, 20000, 92);
  OUParams p;
  double ref = ou_mehler_apply(p, [&](const Vector& y) { return g(y[0]); }, 0.7, vec1(0.4)).value;
  CHECK(std::abs(e.value - ref) < 3 * e.std_error);

  // floors
  for (double t : {0.2, 1.0, 5.0}) {
    double ct = specfun::rate_constants(t, 1.0, kSqrt2).c_t;
    CHECK(hess_lower_bound(q, t, 0.3) == doctest::Approx(-ct * ct).epsilon(1e-14));
  }
  CHECK(hess_lower_bound(h1, 40.0, 0.0) == doctest::Approx(-0.5 * (1 - h1.d2(0.0)) - 1.5).epsilon(1e-9));
  CHECK(hess_lower_bound(h1, 1.0, 0.0, -4.0) == doctest::Approx(-std::pow(specfun::rate_constants(1.0, 1.0, kSqrt2).c_t, 2) - 0.5 * (1 - h1.d2(0.0))).epsilon(1e-14));

  // the floor is respected by the estimator on a small corpus of bumps
  std::mt19937_64 rng(93);
  std::uniform_real_distribution<double> U(0, 1);
  int violations = 0;
  double s2 = sup_v2(h1);
  for (int i = 0; i < 8; ++i) {
    auto f = TestFn::gaussian_bump(vec1(-2 + 4 * U(rng)), 0.2 + U(rng));
    double t = 0.3 + 1.5 * U(rng), x = -1.5 + 3 * U(rng);
    FkOptions opt;
    opt.steps = 64;
    auto H = lh_log_hessian(h1, f, t, x, 10000, seed_derive(94, i), opt);
    if (H.value(0, 0) + 3 * H.std_error(0, 0) < hess_lower_bound(h1, t, x, s2)) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("L_h kernel") {
  auto q = Potential1D::quadratic();
  double s = 0.6, x = 0.3, y = -0.8;
  double var = 1 - std::exp(-2 * s);
  double mehler = std::exp(-std::pow(y - std::exp(-s) * x, 2) / (2 * var)) / std::sqrt(var) * std::exp(y * y / 2);
  CHECK(lh_kernel(q, s, x, y, 10, 1).value == doctest::Approx(mehler).epsilon(1e-12));
  // reversibility of the perturbed kernel with respect to mu_h
  auto h1 = Potential1D::perturbed(1.0);
  auto a = lh_kernel(h1, s, x, y, 4000, 101, 64);
  auto b = lh_kernel(h1, s, y, x, 4000, 102, 64);
  CHECK(std::abs(a.value - b.value) < 3 * std::hypot(a.std_error, b.std_error));
}
