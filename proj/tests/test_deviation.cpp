#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "semilab/deviation.hpp"
#include "semilab/error.hpp"
#include "semilab/numeric.hpp"
#include "semilab/specfun.hpp"

using namespace semilab;
using namespace semilab::deviation;
using semilab::discrete::FuncOnN;
using semilab::discrete::Index;

TEST_CASE("convex conjugate") {
  std::vector<double> ys = linspace(-5, 5, 41);
  auto sq = convex_conjugate([](double x) { return 0.5 * x * x; }, -20, 20, ys);
  for (std::size_t i = 0; i < ys.size(); ++i) CHECK(sq[i] == doctest::Approx(0.5 * ys[i] * ys[i]).epsilon(1e-10));

  std::vector<double> ye{0.1, 1.0, 5.0, 100.0};
  auto ex = convex_conjugate([](double x) { return std::exp(x); }, -40, 10, ye);
  for (std::size_t i = 0; i < ye.size(); ++i) CHECK(ex[i] == doctest::Approx(ye[i] * std::log(ye[i]) - ye[i]).epsilon(1e-10));

  CHECK_THROWS_AS(convex_conjugate([](double x) { return std::sin(x); }, -3, 3, ys), Error);

  // Fenchel-Young
  auto g = [](double x) { return std::exp(x); };
  auto xs = linspace(-3, 2, 11);
  std::vector<double> yy = linspace(0.05, 7, 30);
  auto gs = convex_conjugate(g, -40, 10, yy);
  double worst = -kInf;
  for (double x : xs)
    for (std::size_t j = 0; j < yy.size(); ++j) worst = std::max(worst, yy[j] * x - g(x) - gs[j]);
  CHECK(worst <= 1e-12);
  for (double x : xs) {
    double y = std::exp(x);
    double gy = convex_conjugate(g, -40, 10, {y})[0];
    CHECK(std::abs(y * x - g(x) - gy) < 1e-9);
  }
}

TEST_CASE("biconjugate round trip") {
  std::vector<std::function<double(double)>> corpus{
      [](double x) { return 0.5 * x * x; },
      [](double x) { return std::exp(x); },
      [](double x) { return std::pow(std::abs(x), 3); },
      [](double x) { return std::log(std::cosh(x)); },
      [](double x) { return std::abs(x) + 0.1 * x * x; },
  };
  auto xs = linspace(-2, 2, 9);
  for (auto& g : corpus) {
    auto gg = biconjugate(g, -4, 4, xs, 2001);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      CHECK(gg[i] <= g(xs[i]) + 1e-9);
      CHECK(std::abs(gg[i] - g(xs[i])) < 1e-6);
    }
  }
}

TEST_CASE("semi-convex sup bound") {
  auto h = Potential1D::quadratic();
  auto xs = linspace(-8, 8, 33);
  for (double lam : {-2.0, 0.5, 3.0}) {
    SemiConvexFn f{[lam](double x) { return lam * x; }, 0.0, "linear"};
    auto r = check_semiconvex_sup_bound(h, f, xs);
    CHECK(r.violations == 0);
    for (std::size_t i = 0; i < xs.size(); ++i) CHECK(r.lhs[i] == doctest::Approx(lam * xs[i] - lam * lam / 2).epsilon(1e-10));
  }
  for (double beta : {0.5, 1.0, 5.0})
    for (double m : {-2.0, 0.0, 3.0}) {
      SemiConvexFn f{[beta, m](double x) { return -0.5 * beta * (x - m) * (x - m); }, beta, "tight"};
      CHECK(check_semiconvex_sup_bound(h, f, xs).violations == 0);
      CHECK(check_semiconvex_sup_bound(Potential1D::perturbed(1.0), f, xs).violations == 0);
    }
  SemiConvexFn one{[](double) { return 0.0; }, 0.0, "constant"};
  auto r = check_semiconvex_sup_bound(h, one, xs);
  CHECK(r.violations == 0);
  for (double v : r.lhs) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("semi-log-convex corpus is semi-convex and integrable") {
  for (double beta : {0.0, 1.0, 5.0}) {
    auto corpus = semiconvex_corpus(2024, 20, beta);
    CHECK(corpus.size() == 20);
    for (auto& f : corpus) {
      CHECK_NOTHROW(check_semiconvex(f, -10, 10));
      CHECK(std::isfinite(log_integral(Potential1D::quadratic(), f.phi)));
    }
  }
  SemiConvexFn bad{[](double x) { return -x * x; }, 1.0, "too concave"};
  CHECK_THROWS_AS(check_semiconvex(bad, -3, 3), Error);
}

TEST_CASE("Gaussian tails for log-linear f") {
  auto h = Potential1D::quadratic();
  auto ts = logspace(2.0, 1e6, 25);
  ts.front() = 2.0;
  for (double lam : {0.5, 1.0, 2.5}) {
    SemiConvexFn f{[lam](double x) { return lam * x; }, 0.0, "linear"};
    auto c = deviation_bound_diffusion(h, f, ts);
    CHECK(c.violations == 0);
    CHECK(c.curve.points.front().t == doctest::Approx(2.0));
    for (auto& p : c.curve.points) {
      double z = std::log(p.t) / lam + lam / 2;
      CHECK(p.tail == doctest::Approx(0.5 * std::erfc(z / std::numbers::sqrt2)).epsilon(1e-8));
    }
  }
  auto hp = Potential1D::perturbed(1.0);
  for (auto& f : semiconvex_corpus(5, 10, 1.0)) {
    auto c = deviation_bound_diffusion(hp, f, ts);
    CHECK(c.violations == 0);
    for (std::size_t i = 1; i < c.curve.points.size(); ++i) CHECK(c.curve.points[i].tail <= c.curve.points[i - 1].tail);
  }
  Potential1D skew = Potential1D::quadratic();
  skew.symmetric = false;
  SemiConvexFn f{[](double x) { return x; }, 0.0, "linear"};
  CHECK_THROWS_AS(deviation_bound_diffusion(skew, f, ts), Error);
  CHECK_THROWS_AS(deviation_bound_diffusion(h, f, {1.5}), Error);
}

TEST_CASE("Poisson log-convex deviation") {
  auto ts = logspace(4.0, 1e12, 40);
  auto one = poisson_logconvex_deviation(1.0, FuncOnN::constant(1.0), ts);
  for (auto& p : one.curve.points) CHECK(p.tail == 0.0);

  // f_lambda with lambda = ln k at t = e k^k e^{-k}; k = 3 gives t < 4
  auto rows = discrete::poisson_optimality(4, 30);
  for (auto& r : rows) {
    auto f = FuncOnN::exponential(r.lambda, 1 - std::exp(r.lambda));
    auto d = poisson_logconvex_deviation(1.0, f, {r.t * (1 - 1e-12)});
    double lt = std::log(r.t);
    double scaled = d.curve.points[0].tail * r.t * std::sqrt(lt) / std::sqrt(std::log(lt));
    CHECK(scaled >= r.rhs * (1 - 1e-9));
    CHECK(d.mass == doctest::Approx(1.0).epsilon(1e-12));
  }

  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> U(0, 1);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> w{U(rng), U(rng), U(rng)}, lam{3 * U(rng), 3 * U(rng), 3 * U(rng)};
    double theta = 0.5 + 3 * U(rng);
    auto lf = [w, lam](Index k) {
      std::vector<double> a;
      for (int j = 0; j < 3; ++j) a.push_back(std::log(w[j]) + lam[j] * static_cast<double>(k));
      return log_sum_exp(a);
    };
    auto f = FuncOnN::from_log(lf, std::max({lam[0], lam[1], lam[2]}));
    auto d = poisson_logconvex_deviation(theta, f, ts);
    CHECK(d.proof_bound_violations == 0);
    CHECK(d.proof_bound_checked > 0);
    CHECK(std::isfinite(d.curve.fitted_constant));
    for (std::size_t j = 1; j < d.curve.points.size(); ++j) CHECK(d.curve.points[j].tail <= d.curve.points[j - 1].tail);
  }
  auto concave = FuncOnN::from_log([](Index k) { return -0.3 * static_cast<double>(k * k); }, 0.0);
  CHECK_THROWS_AS(poisson_logconvex_deviation(1.0, concave, ts), Error);
}

TEST_CASE("Poisson counterexample") {
  double direct = 0;
  for (int n = 0; n < 60; ++n) direct += std::exp(-0.5 * n * n);
  CHECK(c_beta(1.0) == doctest::Approx(-std::log(2 * direct)).epsilon(1e-15));

  auto r = poisson_counterexample(1.0, 1.0, 1.0, 400.0);
  CHECK(r.rows.size() >= 10);
  CHECK(r.min_margin >= 0);
  CHECK(r.root_check);
  CHECK(r.concave);
  CHECK(r.above_sqrt_a);
  CHECK(r.increasing_tail_T);
  for (auto& row : r.rows) CHECK(row.product >= r.floor);

  // Z(a) against a brute-force sum
  for (double a : {0.3, 7.5, 40.0}) {
    double s = 0;
    for (int n = 0; n < 400; ++n) s += std::exp(-0.5 * 2.0 * (n - a) * (n - a) + discrete::log_poisson_pmf(3.0, n));
    CHECK(log_gauss_poisson_mass(3.0, 2.0, a) == doctest::Approx(std::log(s)).epsilon(1e-12));
  }
  // u_a solves the stationarity equation
  double u = u_of_a(2.0, 0.5, 30.0);
  CHECK(std::abs(-0.5 * (u - 30.0) - specfun::digamma(u + 1) + std::log(2.0)) < 1e-10);
  CHECK_THROWS_AS(poisson_counterexample(1.0, 1.0, 1.0, 3.0), Error);
  for (double beta : {0.5, 2.0}) {
    auto rb = poisson_counterexample(2.0, beta, 1.0, 300.0);
    CHECK(rb.min_margin >= 0);
  }
}

TEST_CASE("diffusion Talagrand experiment") {
  auto ts = logspace(2.0, 1e6, 12);
  ts.front() = 2.0;
  TalagrandOptions opt;
  opt.corpus_size = 3;
  auto ou = talagrand_diffusion_experiment(Potential1D::quadratic(), 1.0, ts, opt);
  CHECK(ou.violations == 0);
  CHECK(std::isfinite(ou.curve.theory_constant));
  CHECK_FALSE(ou.exploratory);
  for (std::size_t i = 1; i < ou.curve.points.size(); ++i) CHECK(ou.curve.points[i].tail <= ou.curve.points[i - 1].tail);

  opt.n_paths = 600;
  opt.x_points = 31;
  opt.steps = 32;
  auto pert = talagrand_diffusion_experiment(Potential1D::perturbed(1.0), 1.0, ts, opt);
  CHECK(pert.violations == 0);
  CHECK(pert.sup_v2 == doctest::Approx(3.0).epsilon(1e-9));
  double cs = specfun::rate_constants(1.0, 1.0, std::numbers::sqrt2).c_t;
  CHECK(pert.beta == doctest::Approx(cs * cs + 1.5).epsilon(1e-9));

  opt.corpus_size = 1;
  opt.include_spike = false;
  auto cosine = talagrand_diffusion_experiment(Potential1D::cosine(), 1.0, ts, opt);
  CHECK(cosine.exploratory);
  CHECK(std::isnan(cosine.curve.theory_constant));
  CHECK(cosine.curve.label.find("exploratory") != std::string::npos);
}
