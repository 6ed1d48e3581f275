#include "semilab/diffusion.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <random>
#include <thread>

#include "semilab/error.hpp"
#include "semilab/numeric.hpp"
#include "semilab/seed.hpp"
#include "semilab/specfun.hpp"

namespace semilab::diffusion {

OUParams ou_params(double a, double sigma, int dim) {
  require(a > 0 && std::isfinite(a), ErrorKind::Domain, "ou_params: a must be positive");
  require(sigma > 0 && std::isfinite(sigma), ErrorKind::Domain, "ou_params: sigma must be positive");
  require(dim >= 1, ErrorKind::Domain, "ou_params: dim must be >= 1");
  return {a, sigma, dim};
}

double mehler_sd(const OUParams& p, double t) {
  return p.sigma * std::sqrt(-std::expm1(-2 * p.a * t) / (2 * p.a));
}

double alpha_t(const OUParams& p, double t, double s) {
  if (s >= t) return 0.0;
  return std::exp(-p.a * s) * (-std::expm1(-2 * p.a * (t - s))) / (-std::expm1(-2 * p.a * t));
}

TimeGrid uniform_grid(double t, int steps) {
  require(t > 0 && std::isfinite(t), ErrorKind::Domain, "uniform_grid: t must be positive");
  require(steps >= 1, ErrorKind::Domain, "uniform_grid: steps must be >= 1");
  TimeGrid g(static_cast<std::size_t>(steps) + 1);
  for (int k = 0; k <= steps; ++k) g[k] = t * k / steps;
  g.back() = t;
  return g;
}

void validate_grid(const TimeGrid& grid, double t) {
  require(grid.size() >= 2, ErrorKind::Precondition, "time grid needs at least two points");
  require(grid.front() == 0.0, ErrorKind::Precondition, "time grid must start at 0");
  require(grid.back() == t, ErrorKind::Precondition, "time grid must end at t");
  for (std::size_t k = 1; k < grid.size(); ++k)
    require(grid[k] > grid[k - 1], ErrorKind::Precondition, "time grid must be strictly increasing");
}

Potential Potential::zero(int dim) {
  Potential v;
  v.dim = dim;
  v.is_zero = true;
  v.growth_degree = 0;
  v.lower_bound = 0.0;
  v.name = "zero";
  v.jet = [dim](const double*, double* g, double* h) {
    if (g) std::fill(g, g + dim, 0.0);
    if (h) std::fill(h, h + dim * dim, 0.0);
    return 0.0;
  };
  return v;
}

Potential Potential::constant(double c, int dim) {
  Potential v = zero(dim);
  v.is_zero = false;
  v.lower_bound = c;
  v.name = "constant";
  v.jet = [dim, c](const double*, double* g, double* h) {
    if (g) std::fill(g, g + dim, 0.0);
    if (h) std::fill(h, h + dim * dim, 0.0);
    return c;
  };
  return v;
}

Potential Potential::quadratic(double curvature, double offset, int dim) {
  Potential v;
  v.dim = dim;
  v.lower_bound = curvature >= 0 ? offset : -kInf;
  v.growth_degree = 2;
  v.name = "quadratic";
  v.jet = [dim, curvature, offset](const double* x, double* g, double* h) {
    double r2 = 0;
    for (int i = 0; i < dim; ++i) r2 += x[i] * x[i];
    if (g)
      for (int i = 0; i < dim; ++i) g[i] = curvature * x[i];
    if (h)
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) h[i * dim + j] = i == j ? curvature : 0.0;
    return 0.5 * curvature * r2 + offset;
  };
  return v;
}

Potential Potential::from_1d(std::function<double(double)> v, std::function<double(double)> dv,
                             std::function<double(double)> d2v, double lower_bound, std::string name) {
  Potential p;
  p.dim = 1;
  p.lower_bound = lower_bound;
  p.name = std::move(name);
  p.jet = [v = std::move(v), dv = std::move(dv), d2v = std::move(d2v)](const double* x, double* g, double* h) {
    if (g) g[0] = dv(x[0]);
    if (h) h[0] = d2v(x[0]);
    return v(x[0]);
  };
  return p;
}

TestFn TestFn::constant(double c, int dim) {
  require(c > 0, ErrorKind::Domain, "TestFn::constant: c must be positive");
  TestFn f;
  f.dim = dim;
  f.value = [c](const double*) { return c; };
  f.log_derivs = [dim](const double*, double* g, double* h) {
    if (g) std::fill(g, g + dim, 0.0);
    if (h) std::fill(h, h + dim * dim, 0.0);
  };
  return f;
}

TestFn TestFn::gaussian_bump(const Vector& center, double variance, double height) {
  require(variance > 0 && height > 0, ErrorKind::Domain, "gaussian_bump: variance and height must be positive");
  TestFn f;
  int dim = static_cast<int>(center.size());
  f.dim = dim;
  std::vector<double> c(center.data(), center.data() + dim);
  f.value = [c, dim, variance, height](const double* x) {
    double r2 = 0;
    for (int i = 0; i < dim; ++i) r2 += (x[i] - c[i]) * (x[i] - c[i]);
    return height * std::exp(-r2 / (2 * variance));
  };
  f.log_derivs = [c, dim, variance](const double* x, double* g, double* h) {
    if (g)
      for (int i = 0; i < dim; ++i) g[i] = -(x[i] - c[i]) / variance;
    if (h)
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) h[i * dim + j] = i == j ? -1.0 / variance : 0.0;
  };
  return f;
}

TestFn TestFn::from_1d(std::function<double(double)> g, int growth_degree) {
  TestFn f;
  f.dim = 1;
  f.growth_degree = growth_degree;
  f.value = [g = std::move(g)](const double* x) { return g(x[0]); };
  return f;
}

namespace {

double tensor_mehler(const OUParams& p, const std::function<double(const Vector&)>& g, double t, const Vector& x,
                     int order) {
  const auto& rule = gauss_hermite(order);
  double decay = std::exp(-p.a * t), sd = mehler_sd(p, t);
  std::size_t n = rule.nodes.size();
  Vector y(p.dim);
  if (p.dim == 1) {
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
      y[0] = decay * x[0] + sd * rule.nodes[i];
      acc += rule.weights[i] * g(y);
    }
    return acc;
  }
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      y[0] = decay * x[0] + sd * rule.nodes[i];
      y[1] = decay * x[1] + sd * rule.nodes[j];
      acc += rule.weights[i] * rule.weights[j] * g(y);
    }
  return acc;
}

}  // namespace

MehlerResult ou_mehler_apply(const OUParams& p, const std::function<double(const Vector&)>& g, double t,
                             const Vector& x, int quad_order) {
  require(t > 0, ErrorKind::Domain, "ou_mehler_apply: t must be positive");
  require(x.size() == p.dim, ErrorKind::Domain, "ou_mehler_apply: dimension mismatch");
  require(p.dim <= 2, ErrorKind::Unsupported, "ou_mehler_apply: quadrature supports dim 1 and 2");
  MehlerResult r;
  r.value = tensor_mehler(p, g, t, x, quad_order);
  double fine = tensor_mehler(p, g, t, x, quad_order + 40);
  r.refinement_gap = std::abs(fine - r.value) / std::max(std::abs(fine), 1e-300);
  r.growth_warning = !(r.refinement_gap <= 1e-8);
  return r;
}

double ou_log_derivative(const OUParams& p, const std::function<double(double)>& g, double t, double x, int order,
                         int quad_order) {
  require(order == 1 || order == 2, ErrorKind::Domain, "ou_log_derivative: order must be 1 or 2");
  require(t > 0, ErrorKind::Domain, "ou_log_derivative: t must be positive");
  const auto& rule = gauss_hermite(quad_order);
  double decay = std::exp(-p.a * t), sd = mehler_sd(p, t), c = decay / sd;
  double m0 = 0, m1 = 0, m2 = 0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    double y = rule.nodes[i], w = rule.weights[i] * g(decay * x + sd * y);
    m0 += w;
    m1 += w * y;
    m2 += w * y * y;
  }
  require(m0 > 0, ErrorKind::Degenerate, "ou_log_derivative: P_t g vanishes");
  double mu1 = m1 / m0, mu2 = m2 / m0;
  if (order == 1) return c * mu1;
  return c * c * (mu2 - 1.0 - mu1 * mu1);
}

namespace {

struct GridCache {
  double t = 0, d_t = 0;
  int M = 0;
  std::vector<double> s, decay, step_sd, tw, alpha, e1, e2;
};

GridCache make_cache(const OUParams& p, const TimeGrid& grid) {
  GridCache G;
  G.t = grid.back();
  validate_grid(grid, G.t);
  G.M = static_cast<int>(grid.size()) - 1;
  G.s = grid;
  G.d_t = specfun::rate_constants(G.t, p.a, p.sigma).d_t;
  std::size_t n = grid.size();
  G.decay.resize(n - 1);
  G.step_sd.resize(n - 1);
  G.tw.assign(n, 0.0);
  G.alpha.resize(n);
  G.e1.resize(n);
  G.e2.resize(n);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    double dt = grid[k + 1] - grid[k];
    G.decay[k] = std::exp(-p.a * dt);
    G.step_sd[k] = p.sigma * std::sqrt(-std::expm1(-2 * p.a * dt) / (2 * p.a));
    G.tw[k] += 0.5 * dt;
    G.tw[k + 1] += 0.5 * dt;
  }
  for (std::size_t k = 0; k < n; ++k) {
    G.alpha[k] = alpha_t(p, G.t, grid[k]);
    G.e1[k] = std::exp(-p.a * grid[k]);
    G.e2[k] = G.e1[k] * G.e1[k];
  }
  G.alpha[0] = 1.0;
  G.alpha[n - 1] = 0.0;
  return G;
}

template <class Fn>
void for_chunks(std::size_t n, std::size_t chunk, unsigned threads, Fn&& fn) {
  std::size_t nc = (n + chunk - 1) / chunk;
  unsigned T = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  T = static_cast<unsigned>(std::min<std::size_t>(T, nc));
  if (T <= 1) {
    for (std::size_t c = 0; c < nc; ++c) fn(c, c * chunk, std::min(n, (c + 1) * chunk));
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(T);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < T; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t c = next++; c < nc; c = next++) fn(c, c * chunk, std::min(n, (c + 1) * chunk));
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::uint64_t chunk_seed(std::uint64_t seed, std::size_t c) { return seed_derive(seed, "fk-chunk", c); }

// flat per-path record: logw, f, X_t, A, A~, K, K~
struct Store {
  int d = 1, need = 0;
  std::size_t stride = 0, n = 0;
  std::vector<double> data;

  std::size_t off_x() const { return 2; }
  std::size_t off_a() const { return 2 + d; }
  std::size_t off_at() const { return 2 + 2 * d; }
  std::size_t off_k() const { return 2 + 3 * d; }
  std::size_t off_kt() const { return 2 + 3 * d + d * d; }
  double* row(std::size_t i) { return data.data() + i * stride; }
  const double* row(std::size_t i) const { return data.data() + i * stride; }
};

template <int D>
void mc_pass(const OUParams& p, const Potential& V, const TestFn& f, const GridCache& G, const Vector& x0,
             std::uint64_t seed, const FkOptions& opt, Store& st) {
  using Vec = Eigen::Matrix<double, D, 1>;
  using Mat = Eigen::Matrix<double, D, D>;
  const int d = p.dim;
  const int need = st.need;
  for_chunks(st.n, opt.chunk_paths, opt.threads, [&](std::size_t c, std::size_t begin, std::size_t end) {
    std::mt19937_64 rng(chunk_seed(seed, c));
    std::normal_distribution<double> nd;
    Vec x = x0;
    Vec N(d), X(d), g(d), A(d), At(d);
    Mat H(d, d), K(d, d), Kt(d, d);
    for (std::size_t i = begin; i < end; ++i) {
      N.setZero();
      A.setZero();
      At.setZero();
      K.setZero();
      Kt.setZero();
      double lw = 0;
      for (int k = 0; k <= G.M; ++k) {
        X = G.e1[k] * x + N;
        if (!V.is_zero) {
          double v = V.jet(X.data(), need >= 1 ? g.data() : nullptr, need >= 2 ? H.data() : nullptr);
          lw -= G.tw[k] * v;
          if (need >= 1) {
            A -= (G.tw[k] * G.alpha[k]) * g;
            At += (G.tw[k] * G.e1[k]) * g;
          }
          if (need >= 2) {
            K += (G.tw[k] * G.alpha[k] * G.alpha[k]) * H;
            Kt += (G.tw[k] * G.e2[k]) * H;
          }
        }
        if (k < G.M)
          for (int j = 0; j < d; ++j) N[j] = G.decay[k] * N[j] + G.step_sd[k] * nd(rng);
      }
      double fv = f.value(X.data());
      double* r = st.row(i);
      bool ok = std::isfinite(lw) && std::isfinite(fv) && fv >= 0;
      r[0] = ok ? lw : kNaN;
      r[1] = fv;
      for (int j = 0; j < d; ++j) r[st.off_x() + j] = X[j];
      if (need >= 1) {
        A += G.d_t * N;
        for (int j = 0; j < d; ++j) {
          r[st.off_a() + j] = A[j];
          r[st.off_at() + j] = At[j];
        }
      }
      if (need >= 2)
        for (int j = 0; j < d * d; ++j) {
          r[st.off_k() + j] = K.data()[j];
          r[st.off_kt() + j] = Kt.data()[j];
        }
    }
  });
}

Store run_mc(const OUParams& p, const Potential& V, const TestFn& f, const TimeGrid& grid, const Vector& x,
             std::size_t n_paths, std::uint64_t seed, const FkOptions& opt, int need) {
  require(n_paths >= 2, ErrorKind::Domain, "need at least two paths");
  require(x.size() == p.dim && V.dim == p.dim && f.dim == p.dim, ErrorKind::Domain, "dimension mismatch");
  require(opt.chunk_paths >= 1, ErrorKind::Domain, "chunk_paths must be positive");
  GridCache G = make_cache(p, grid);
  Store st;
  st.d = p.dim;
  st.need = need;
  st.stride = 2 + 3 * st.d + 2 * st.d * st.d;
  st.n = n_paths;
  st.data.assign(st.stride * n_paths, 0.0);
  if (p.dim == 1)
    mc_pass<1>(p, V, f, G, x, seed, opt, st);
  else if (p.dim == 2)
    mc_pass<2>(p, V, f, G, x, seed, opt, st);
  else
    mc_pass<Eigen::Dynamic>(p, V, f, G, x, seed, opt, st);
  return st;
}

struct Weights {
  std::vector<double> w;  // f e^{logw - shift}, 0 for rejected
  std::vector<char> ok;
  double shift = 0, mean = 0;
  std::size_t accepted = 0, rejected = 0;
};

Weights weights_of(const Store& st, const FkOptions& opt) {
  Weights W;
  W.w.assign(st.n, 0.0);
  W.ok.assign(st.n, 0);
  W.shift = -kInf;
  for (std::size_t i = 0; i < st.n; ++i) {
    const double* r = st.row(i);
    if (std::isnan(r[0])) {
      ++W.rejected;
      continue;
    }
    W.ok[i] = 1;
    ++W.accepted;
    if (r[1] > 0) W.shift = std::max(W.shift, r[0]);
  }
  require(static_cast<double>(W.rejected) <= opt.max_reject_fraction * static_cast<double>(st.n),
          ErrorKind::Accuracy, "too many non-finite path weights; refine the time grid");
  require(W.shift > -kInf, ErrorKind::Degenerate, "all path weights vanish");
  double sum = 0;
  for (std::size_t i = 0; i < st.n; ++i)
    if (W.ok[i]) {
      const double* r = st.row(i);
      W.w[i] = r[1] > 0 ? r[1] * std::exp(r[0] - W.shift) : 0.0;
      sum += W.w[i];
    }
  W.mean = sum / static_cast<double>(W.accepted);
  require(W.mean > 0, ErrorKind::Degenerate, "all path weights vanish");
  return W;
}

FkEstimate value_estimate(const Weights& W) {
  double var = 0;
  for (std::size_t i = 0; i < W.w.size(); ++i)
    if (W.ok[i]) var += (W.w[i] - W.mean) * (W.w[i] - W.mean);
  double n = static_cast<double>(W.accepted);
  var /= (n - 1);
  FkEstimate e;
  e.log_value = std::log(W.mean) + W.shift;
  e.value = std::exp(e.log_value);
  e.std_error = std::sqrt(var / n) * std::exp(W.shift);
  e.n_paths = W.accepted;
  e.rejected = W.rejected;
  return e;
}

// self-normalized weighted mean of a d-vector stored at `off`
Vector weighted_mean(const Store& st, const Weights& W, std::size_t off, int len) {
  Vector m = Vector::Zero(len);
  double sw = 0;
  for (std::size_t i = 0; i < st.n; ++i) {
    if (!W.ok[i] || W.w[i] == 0) continue;
    const double* r = st.row(i);
    for (int j = 0; j < len; ++j) m[j] += W.w[i] * r[off + j];
    sw += W.w[i];
  }
  return m / sw;
}

// Cov_w(B) - Kbar + base with B, K per path, influence-function standard errors
HessEstimate covariance_hessian(const Store& st, const Weights& W, const std::vector<double>& B,
                                const std::vector<double>& K, const Matrix& base) {
  int d = st.d;
  std::size_t n = st.n;
  double sw = 0;
  Vector Bbar = Vector::Zero(d);
  Matrix Kbar = Matrix::Zero(d, d);
  for (std::size_t i = 0; i < n; ++i) {
    if (!W.ok[i] || W.w[i] == 0) continue;
    sw += W.w[i];
    for (int j = 0; j < d; ++j) Bbar[j] += W.w[i] * B[i * d + j];
    for (int j = 0; j < d * d; ++j) Kbar.data()[j] += W.w[i] * K[i * d * d + j];
  }
  Bbar /= sw;
  Kbar /= sw;
  Matrix C = Matrix::Zero(d, d);
  for (std::size_t i = 0; i < n; ++i) {
    if (!W.ok[i] || W.w[i] == 0) continue;
    for (int j = 0; j < d; ++j)
      for (int l = 0; l < d; ++l) C(j, l) += W.w[i] * (B[i * d + j] - Bbar[j]) * (B[i * d + l] - Bbar[l]);
  }
  C /= sw;
  HessEstimate h;
  h.value = base + C - Kbar;
  h.std_error = Matrix::Zero(d, d);
  double m = W.mean, na = static_cast<double>(W.accepted);
  for (std::size_t i = 0; i < n; ++i) {
    if (!W.ok[i]) continue;
    double r = W.w[i] / m;
    if (r == 0) continue;
    for (int j = 0; j < d; ++j)
      for (int l = 0; l < d; ++l) {
        double inf = r * ((B[i * d + j] - Bbar[j]) * (B[i * d + l] - Bbar[l]) - K[i * d * d + j * d + l] -
                          (C(j, l) - Kbar(j, l)));
        h.std_error(j, l) += inf * inf;
      }
  }
  h.std_error = (h.std_error / (na * (na - 1))).cwiseSqrt();
  h.n_paths = W.accepted;
  return h;
}

}  // namespace

FkEstimate feynman_kac_apply(const OUParams& p, const Potential& V, const TestFn& f, double t, const Vector& x,
                             std::size_t n_paths, const TimeGrid& grid, std::uint64_t seed, const FkOptions& opt) {
  require(t > 0, ErrorKind::Domain, "feynman_kac_apply: t must be positive");
  validate_grid(grid, t);
  Store st = run_mc(p, V, f, grid, x, n_paths, seed, opt, 0);
  return value_estimate(weights_of(st, opt));
}

FkEstimate feynman_kac_apply(const OUParams& p, const Potential& V, const TestFn& f, double t, const Vector& x,
                             std::size_t n_paths, std::uint64_t seed, const FkOptions& opt) {
  return feynman_kac_apply(p, V, f, t, x, n_paths, uniform_grid(t, opt.steps), seed, opt);
}

GradEstimate grad_log_fk(const OUParams& p, const Potential& V, const TestFn& f, double t, const Vector& x,
                         std::size_t n_paths, std::uint64_t seed, const FkOptions& opt) {
  require(t > 0, ErrorKind::Domain, "grad_log_fk: t must be positive");
  Store st = run_mc(p, V, f, uniform_grid(t, opt.steps), x, n_paths, seed, opt, 1);
  Weights W = weights_of(st, opt);
  int d = p.dim;
  GradEstimate g;
  g.value = weighted_mean(st, W, st.off_a(), d);
  g.std_error = Vector::Zero(d);
  for (std::size_t i = 0; i < st.n; ++i) {
    if (!W.ok[i] || W.w[i] == 0) continue;
    const double* r = st.row(i);
    for (int j = 0; j < d; ++j) {
      double inf = W.w[i] / W.mean * (r[st.off_a() + j] - g.value[j]);
      g.std_error[j] += inf * inf;
    }
  }
  double na = static_cast<double>(W.accepted);
  g.std_error = (g.std_error / (na * (na - 1))).cwiseSqrt();
  g.n_paths = W.accepted;
  return g;
}

HessEstimate hess_log_fk(const OUParams& p, const Potential& V, const TestFn& f, double t, const Vector& x,
                         std::size_t n_paths, std::uint64_t seed, const FkOptions& opt) {
  require(t > 0, ErrorKind::Domain, "hess_log_fk: t must be positive");
  Store st = run_mc(p, V, f, uniform_grid(t, opt.steps), x, n_paths, seed, opt, 2);
  Weights W = weights_of(st, opt);
  int d = p.dim;
  std::vector<double> B(st.n * d), K(st.n * d * d);
  for (std::size_t i = 0; i < st.n; ++i) {
    const double* r = st.row(i);
    for (int j = 0; j < d; ++j) B[i * d + j] = r[st.off_a() + j];
    for (int j = 0; j < d * d; ++j) K[i * d * d + j] = r[st.off_k() + j];
  }
  auto rc = specfun::rate_constants(t, p.a, p.sigma);
  Matrix base = -(rc.d_t * std::exp(-p.a * t)) * Matrix::Identity(d, d);
  return covariance_hessian(st, W, B, K, base);
}

HessEstimate hess_log_fk_alt(const OUParams& p, const Potential& V, const TestFn& f, double t, const Vector& x,
                             std::size_t n_paths, std::uint64_t seed, const FkOptions& opt) {
  require(t > 0, ErrorKind::Domain, "hess_log_fk_alt: t must be positive");
  require(static_cast<bool>(f.log_derivs), ErrorKind::Unsupported, "hess_log_fk_alt: f needs log-derivatives");
  Store st = run_mc(p, V, f, uniform_grid(t, opt.steps), x, n_paths, seed, opt, 2);
  Weights W = weights_of(st, opt);
  int d = p.dim;
  double e1 = std::exp(-p.a * t), e2 = e1 * e1;
  std::vector<double> B(st.n * d), K(st.n * d * d);
  Vector gl(d);
  Matrix hl(d, d);
  for (std::size_t i = 0; i < st.n; ++i) {
    if (!W.ok[i] || W.w[i] == 0) continue;
    const double* r = st.row(i);
    f.log_derivs(r + st.off_x(), gl.data(), hl.data());
    for (int j = 0; j < d; ++j) B[i * d + j] = e1 * gl[j] - r[st.off_at() + j];
    for (int j = 0; j < d * d; ++j) K[i * d * d + j] = r[st.off_kt() + j] - e2 * hl.data()[j];
  }
  return covariance_hessian(st, W, B, K, Matrix::Zero(d, d));
}

namespace {

template <int D>
void fd_pass(const OUParams& p, const Potential& V, const TestFn& f, const GridCache& G, const Vector& x0,
             const std::vector<Vector>& stencil, std::uint64_t seed, const FkOptions& opt, std::size_t n,
             std::vector<double>& logw, std::vector<double>& fval) {
  using Vec = Eigen::Matrix<double, D, 1>;
  const int d = p.dim;
  const std::size_t J = stencil.size();
  std::vector<Vec> starts;
  for (const auto& s : stencil) starts.push_back(x0 + s);
  for_chunks(n, opt.chunk_paths, opt.threads, [&](std::size_t c, std::size_t begin, std::size_t end) {
    std::mt19937_64 rng(chunk_seed(seed, c));
    std::normal_distribution<double> nd;
    Vec N(d), X(d);
    std::vector<double> lw(J);
    for (std::size_t i = begin; i < end; ++i) {
      N.setZero();
      std::fill(lw.begin(), lw.end(), 0.0);
      for (int k = 0; k <= G.M; ++k) {
        if (!V.is_zero)
          for (std::size_t j = 0; j < J; ++j) {
            X = G.e1[k] * starts[j] + N;
            lw[j] -= G.tw[k] * V(X.data());
          }
        if (k < G.M)
          for (int q = 0; q < d; ++q) N[q] = G.decay[k] * N[q] + G.step_sd[k] * nd(rng);
      }
      for (std::size_t j = 0; j < J; ++j) {
        X = G.e1[G.M] * starts[j] + N;
        logw[i * J + j] = lw[j];
        fval[i * J + j] = f.value(X.data());
      }
    }
  });
}

}  // namespace

FdEstimate fd_log_derivatives(const OUParams& p, const Potential& V, const TestFn& f, double t, const Vector& x,
                              std::size_t n_paths, std::uint64_t seed, bool gradient, bool hessian,
                              const FkOptions& opt) {
  require(t > 0, ErrorKind::Domain, "fd_log_derivatives: t must be positive");
  require(n_paths >= 2, ErrorKind::Domain, "need at least two paths");
  require(x.size() == p.dim && V.dim == p.dim && f.dim == p.dim, ErrorKind::Domain, "dimension mismatch");
  const int d = p.dim;
  const double eps = std::numeric_limits<double>::epsilon();
  FdEstimate out;
  out.h_grad = std::cbrt(eps);
  out.h_hess = std::pow(eps, 0.25);
  Vector scale(d);
  for (int i = 0; i < d; ++i) scale[i] = std::max(1.0, std::abs(x[i]));

  // stencil: 0, then gradient pairs, then per-coordinate +-h, +-2h, then mixed corners
  std::vector<Vector> st{Vector::Zero(d)};
  auto unit = [d](int i, double v) {
    Vector e = Vector::Zero(d);
    e[i] = v;
    return e;
  };
  std::vector<int> ig(d), ih(d), im;
  if (gradient)
    for (int i = 0; i < d; ++i) {
      ig[i] = static_cast<int>(st.size());
      st.push_back(unit(i, out.h_grad * scale[i]));
      st.push_back(unit(i, -out.h_grad * scale[i]));
    }
  if (hessian) {
    for (int i = 0; i < d; ++i) {
      double h = out.h_hess * scale[i];
      ih[i] = static_cast<int>(st.size());
      st.push_back(unit(i, h));
      st.push_back(unit(i, -h));
      st.push_back(unit(i, 2 * h));
      st.push_back(unit(i, -2 * h));
    }
    for (int i = 0; i < d; ++i)
      for (int l = i + 1; l < d; ++l) {
        im.push_back(static_cast<int>(st.size()));
        double hi = out.h_hess * scale[i], hl = out.h_hess * scale[l];
        for (int si : {1, -1})
          for (int sl : {1, -1}) {
            Vector e = Vector::Zero(d);
            e[i] = si * hi;
            e[l] = sl * hl;
            st.push_back(e);
          }
      }
  }
  const std::size_t J = st.size();
  GridCache G = make_cache(p, uniform_grid(t, opt.steps));
  std::vector<double> logw(n_paths * J), fval(n_paths * J);
  if (d == 1)
    fd_pass<1>(p, V, f, G, x, st, seed, opt, n_paths, logw, fval);
  else if (d == 2)
    fd_pass<2>(p, V, f, G, x, st, seed, opt, n_paths, logw, fval);
  else
    fd_pass<Eigen::Dynamic>(p, V, f, G, x, st, seed, opt, n_paths, logw, fval);

  std::vector<char> ok(n_paths, 1);
  std::size_t rejected = 0;
  double shift = -kInf;
  for (std::size_t i = 0; i < n_paths; ++i) {
    for (std::size_t j = 0; j < J; ++j)
      if (!std::isfinite(logw[i * J + j]) || !std::isfinite(fval[i * J + j]) || fval[i * J + j] < 0) ok[i] = 0;
    if (!ok[i]) {
      ++rejected;
      continue;
    }
    for (std::size_t j = 0; j < J; ++j)
      if (fval[i * J + j] > 0) shift = std::max(shift, logw[i * J + j]);
  }
  require(static_cast<double>(rejected) <= opt.max_reject_fraction * static_cast<double>(n_paths),
          ErrorKind::Accuracy, "too many non-finite path weights; refine the time grid");
  require(shift > -kInf, ErrorKind::Degenerate, "all path weights vanish");
  std::vector<double> w(n_paths * J, 0.0);
  std::vector<double> m(J, 0.0), diff(J, 0.0);
  double na = static_cast<double>(n_paths - rejected);
  for (std::size_t i = 0; i < n_paths; ++i) {
    if (!ok[i]) continue;
    for (std::size_t j = 0; j < J; ++j) {
      double fv = fval[i * J + j];
      w[i * J + j] = fv > 0 ? fv * std::exp(logw[i * J + j] - shift) : 0.0;
    }
    for (std::size_t j = 0; j < J; ++j) {
      m[j] += w[i * J + j];
      diff[j] += w[i * J + j] - w[i * J];
    }
  }
  for (std::size_t j = 0; j < J; ++j) {
    m[j] /= na;
    diff[j] /= na;
  }
  require(m[0] > 0, ErrorKind::Degenerate, "all path weights vanish");
  // L_j = ln m_j - ln m_0
  std::vector<double> L(J);
  for (std::size_t j = 0; j < J; ++j) L[j] = std::log1p(diff[j] / m[0]);

  // standard error of sum_j c_j ln m_j by the influence function sum_j c_j w_ij / m_j
  auto se_of = [&](const std::vector<std::pair<int, double>>& coef) {
    double mean = 0, ss = 0;
    std::vector<double> inf(n_paths, 0.0);
    for (std::size_t i = 0; i < n_paths; ++i) {
      if (!ok[i]) continue;
      double v = 0;
      for (auto [j, c] : coef) v += c * w[i * J + j] / m[j];
      inf[i] = v;
      mean += v;
    }
    mean /= na;
    for (std::size_t i = 0; i < n_paths; ++i)
      if (ok[i]) ss += (inf[i] - mean) * (inf[i] - mean);
    return std::sqrt(ss / (na - 1) / na);
  };

  out.n_paths = n_paths - rejected;
  if (gradient) {
    out.grad = Vector::Zero(d);
    out.grad_se = Vector::Zero(d);
    for (int i = 0; i < d; ++i) {
      double h = out.h_grad * scale[i];
      int j = ig[i];
      out.grad[i] = (L[j] - L[j + 1]) / (2 * h);
      out.grad_se[i] = se_of({{j, 1 / (2 * h)}, {j + 1, -1 / (2 * h)}});
    }
  }
  if (hessian) {
    out.hess = Matrix::Zero(d, d);
    out.hess_se = Matrix::Zero(d, d);
    out.hess_richardson = Matrix::Zero(d, d);
    for (int i = 0; i < d; ++i) {
      double h = out.h_hess * scale[i], h2 = h * h;
      int j = ih[i];
      double dh = (L[j] + L[j + 1]) / h2;
      double d2h = (L[j + 2] + L[j + 3]) / (4 * h2);
      out.hess(i, i) = dh;
      out.hess_richardson(i, i) = std::abs(dh - d2h) / 3;
      out.hess_se(i, i) = se_of({{0, -2 / h2}, {j, 1 / h2}, {j + 1, 1 / h2}});
    }
    std::size_t q = 0;
    for (int i = 0; i < d; ++i)
      for (int l = i + 1; l < d; ++l, ++q) {
        int j = im[q];
        double den = 4 * out.h_hess * scale[i] * out.h_hess * scale[l];
        double v = (L[j] - L[j + 1] - L[j + 2] + L[j + 3]) / den;
        double se = se_of({{j, 1 / den}, {j + 1, -1 / den}, {j + 2, -1 / den}, {j + 3, 1 / den}});
        out.hess(i, l) = out.hess(l, i) = v;
        out.hess_se(i, l) = out.hess_se(l, i) = se;
      }
  }
  return out;
}

Matrix sample_ou_path(const OUParams& p, const Vector& x, const TimeGrid& grid, std::uint64_t seed) {
  require(x.size() == p.dim, ErrorKind::Domain, "sample_ou_path: dimension mismatch");
  validate_grid(grid, grid.back());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Matrix path(p.dim, grid.size());
  path.col(0) = x;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    double dt = grid[k] - grid[k - 1];
    double decay = std::exp(-p.a * dt), sd = p.sigma * std::sqrt(-std::expm1(-2 * p.a * dt) / (2 * p.a));
    for (int j = 0; j < p.dim; ++j) path(j, k) = decay * path(j, k - 1) + sd * nd(rng);
  }
  return path;
}

std::pair<double, double> ou_bridge_moments(const OUParams& p, double x, double y, double t, double s) {
  require(t > 0 && s >= 0 && s <= t, ErrorKind::Domain, "ou_bridge_moments: need 0 <= s <= t");
  double vs = p.sigma * p.sigma * (-std::expm1(-2 * p.a * s)) / (2 * p.a);
  double vt = p.sigma * p.sigma * (-std::expm1(-2 * p.a * t)) / (2 * p.a);
  double k = std::exp(-p.a * (t - s)) * vs / vt;
  double mean = std::exp(-p.a * s) * x + k * (y - std::exp(-p.a * t) * x);
  double var = vs - k * std::exp(-p.a * (t - s)) * vs;
  return {mean, std::max(var, 0.0)};
}

Matrix sample_ou_bridge(const OUParams& p, const Vector& x, const Vector& y, double t, const TimeGrid& grid,
                        std::uint64_t seed) {
  require(t > 0, ErrorKind::Domain, "sample_ou_bridge: t must be positive");
  require(x.size() == p.dim && y.size() == p.dim, ErrorKind::Domain, "sample_ou_bridge: dimension mismatch");
  require(!grid.empty() && grid.front() == 0.0 && grid.back() <= t, ErrorKind::Precondition,
          "sample_ou_bridge: grid must lie in [0, t] and start at 0");
  for (std::size_t k = 1; k < grid.size(); ++k)
    require(grid[k] > grid[k - 1], ErrorKind::Precondition, "sample_ou_bridge: grid must be strictly increasing");
  TimeGrid g = grid;
  if (g.back() < t) g.push_back(t);
  // free noise N on the grid, then condition on X_t = y
  Matrix N = sample_ou_path(p, Vector::Zero(p.dim), g, seed);
  double vt = p.sigma * p.sigma * (-std::expm1(-2 * p.a * t)) / (2 * p.a);
  Matrix out(p.dim, g.size());
  Vector Nt = N.col(g.size() - 1);
  Vector resid = y - std::exp(-p.a * t) * x - Nt;
  for (std::size_t k = 0; k < g.size(); ++k) {
    double s = g[k];
    double vs = p.sigma * p.sigma * (-std::expm1(-2 * p.a * s)) / (2 * p.a);
    double kk = std::exp(-p.a * (t - s)) * vs / vt;
    out.col(k) = std::exp(-p.a * s) * x + N.col(k) + kk * resid;
  }
  out.col(g.size() - 1) = y;
  return out;
}

Vector a_statistic(const OUParams& p, const Potential& V, const Matrix& path, const TimeGrid& grid, const Vector& x) {
  require(path.rows() == p.dim && static_cast<std::size_t>(path.cols()) == grid.size(), ErrorKind::Domain,
          "a_statistic: path shape does not match the grid");
  GridCache G = make_cache(p, grid);
  Vector A = Vector::Zero(p.dim), g(p.dim);
  for (int k = 0; k <= G.M; ++k) {
    Vector X = path.col(k);
    V.jet(X.data(), g.data(), nullptr);
    A -= (G.tw[k] * G.alpha[k]) * g;
  }
  A += G.d_t * (path.col(G.M) - std::exp(-p.a * G.t) * x);
  return A;
}

FkPathBatch simulate_fk_batch(const OUParams& p, const Potential& V, const TestFn& f, double t, const Vector& x,
                              std::size_t n_paths, const TimeGrid& grid, std::uint64_t seed) {
  validate_grid(grid, t);
  require(x.size() == p.dim, ErrorKind::Domain, "simulate_fk_batch: dimension mismatch");
  FkOptions opt;
  GridCache G = make_cache(p, grid);
  FkPathBatch b;
  b.n_paths = n_paths;
  b.time_grid = grid;
  b.seed = seed;
  b.states.resize(n_paths);
  b.log_weights.resize(n_paths);
  b.terminal_f.resize(n_paths);
  b.a_stat.resize(n_paths);
  for_chunks(n_paths, opt.chunk_paths, 1, [&](std::size_t c, std::size_t begin, std::size_t end) {
    std::mt19937_64 rng(chunk_seed(seed, c));
    std::normal_distribution<double> nd;
    Vector N = Vector::Zero(p.dim);
    for (std::size_t i = begin; i < end; ++i) {
      N.setZero();
      Matrix path(p.dim, G.M + 1);
      double lw = 0;
      for (int k = 0; k <= G.M; ++k) {
        path.col(k) = G.e1[k] * x + N;
        if (!V.is_zero) lw -= G.tw[k] * V(path.col(k).data());
        if (k < G.M)
          for (int j = 0; j < p.dim; ++j) N[j] = G.decay[k] * N[j] + G.step_sd[k] * nd(rng);
      }
      Vector xt = path.col(G.M);
      b.terminal_f[i] = f.value(xt.data());
      b.log_weights[i] = lw;
      b.a_stat[i] = a_statistic(p, V, path, grid, x);
      b.states[i] = std::move(path);
    }
  });
  return b;
}

Potential1D Potential1D::quadratic() {
  Potential1D h;
  h.h = [](double x) { return 0.5 * x * x; };
  h.d1 = [](double x) { return x; };
  h.d2 = [](double) { return 1.0; };
  h.d3 = [](double) { return 0.0; };
  h.d4 = [](double) { return 0.0; };
  h.v_lower_bound = 0.0;
  h.c = h.C = 1.0;
  h.name = "quadratic";
  return h;
}

Potential1D Potential1D::perturbed(double p) {
  require(p > 0 && p <= 2, ErrorKind::Unsupported, "perturbed h: exponent must lie in (0, 2]");
  Potential1D h;
  h.h = [p](double x) { return 0.5 * x * x + std::pow(1 + x * x, p / 2); };
  h.d1 = [p](double x) { return x + p * x * std::pow(1 + x * x, p / 2 - 1); };
  h.d2 = [p](double x) {
    double u = 1 + x * x;
    return 1 + p * std::pow(u, p / 2 - 1) + p * (p - 2) * x * x * std::pow(u, p / 2 - 2);
  };
  h.d3 = [p](double x) {
    double u = 1 + x * x;
    return p * x * std::pow(u, p / 2 - 3) * (p * p * x * x - 6 * p * x * x + 8 * x * x + 3 * (p - 2) * u);
  };
  h.d4 = [p](double x) {
    double u = 1 + x * x, x2 = x * x;
    return p * std::pow(u, p / 2 - 4) *
           (x2 * x2 * (p * p * p - 12 * p * p + 44 * p - 48) + 6 * x2 * u * (p * p - 6 * p + 8) + 3 * (p - 2) * u * u);
  };
  h.name = "perturbed";
  double lo = kInf, hi = -kInf, vmin = kInf;
  for (double x = -60; x <= 60; x += 0.005) {
    double d2 = h.d2(x), d1 = h.d1(x);
    lo = std::min(lo, d2);
    hi = std::max(hi, d2);
    vmin = std::min(vmin, 0.5 * (1 - d2) - 0.25 * (x * x - d1 * d1));
  }
  if (p < 2) {
    lo = std::min(lo, 1.0);
    hi = std::max(hi, 1.0);
  }
  h.c = lo;
  h.C = hi;
  h.v_lower_bound = vmin - 1e-9;
  return h;
}

Potential1D Potential1D::cosine() {
  Potential1D h;
  h.h = [](double x) { return 0.5 * x * x + std::cos(x); };
  h.d1 = [](double x) { return x - std::sin(x); };
  h.d2 = [](double x) { return 1 - std::cos(x); };
  h.d3 = [](double x) { return std::sin(x); };
  h.d4 = [](double x) { return std::cos(x); };
  h.c = 0.0;
  h.C = 2.0;
  h.name = "cosine";
  return h;
}

HTransform h_transform(const Potential1D& h) {
  HTransform T;
  T.W = [h](double x) { return 0.5 * x * x - h.h(x); };
  T.V = [h](double x) {
    double d1 = h.d1(x);
    return 0.5 * (1 - h.d2(x)) - 0.25 * (x * x - d1 * d1);
  };
  T.dV = [h](double x) { return -0.5 * h.d3(x) - 0.5 * x + 0.5 * h.d1(x) * h.d2(x); };
  T.d2V = [h](double x) {
    double d2 = h.d2(x);
    return -0.5 * h.d4(x) - 0.5 + 0.5 * (d2 * d2 + h.d1(x) * h.d3(x));
  };
  if (h.name == "quadratic") {
    T.potential = Potential::zero(1);
  } else {
    T.potential = Potential::from_1d(T.V, T.dV, T.d2V, h.v_lower_bound.value_or(-kInf), "h-transform " + h.name);
  }
  return T;
}

double log_normalizer(const Potential1D& h) {
  double L = 15.0 / std::sqrt(std::min(1.0, std::max(h.c, 0.5)));
  double breaks[] = {0.0};
  auto q = integrate([&h](double x) { return std::exp(-h.h(x)); }, -L, L, 1e-15, 1e-13, breaks);
  return std::log(q.value);
}

namespace {

double sup_on(const std::function<double(double)>& f, double R) {
  const int n = 12001;
  double best = -kInf, lo = kInf;
  int arg = 0;
  for (int i = 0; i < n; ++i) {
    double v = f(-R + 2 * R * i / (n - 1));
    lo = std::min(lo, v);
    if (v > best) {
      best = v;
      arg = i;
    }
  }
  if (best - lo <= 1e-14 * std::max(1.0, std::abs(best))) return best;
  require(arg > 0 && arg < n - 1, ErrorKind::Range, "sup V'': maximum sits on the boundary of the bracket");
  double step = 2 * R / (n - 1), xc = -R + step * arg;
  return std::max(best, f(golden_max(f, xc - step, xc + step, 1e-10)));
}

}  // namespace

double sup_v2(const Potential1D& h, double R) {
  HTransform T = h_transform(h);
  double inner = sup_on(T.d2V, R), outer = sup_on(T.d2V, 2 * R);
  require(outer <= inner + 1e-9 * std::max(1.0, std::abs(inner)), ErrorKind::Range,
          "sup V'': not bracketed, the supremum keeps growing with the range");
  return inner;
}

void check_admissible(const Potential1D& h, double x, double envelope) {
  require(h.v_lower_bound.has_value(), ErrorKind::Precondition, "inadmissible h: derived V is unbounded below");
  HTransform T = h_transform(h);
  for (double y = x - envelope; y <= x + envelope; y += envelope / 2000) {
    double v = T.V(y);
    require(std::isfinite(v) && v >= *h.v_lower_bound - 1e-9, ErrorKind::Precondition,
            "inadmissible h: derived V falls below its declared bound on the sampling range");
  }
}

namespace {

TestFn intertwined(const HTransform& T, const TestFn& f, const Potential1D& h) {
  TestFn g;
  g.dim = 1;
  g.growth_degree = f.growth_degree;
  auto W = T.W;
  g.value = [W, fv = f.value](const double* x) { return std::exp(0.5 * W(x[0])) * fv(x); };
  if (f.log_derivs)
    g.log_derivs = [h, ld = f.log_derivs](const double* x, double* gr, double* he) {
      double fg = 0, fh = 0;
      ld(x, &fg, &fh);
      if (gr) *gr = fg + 0.5 * (x[0] - h.d1(x[0]));
      if (he) *he = fh + 0.5 * (1 - h.d2(x[0]));
    };
  return g;
}

}  // namespace

FkEstimate lh_apply(const Potential1D& h, const std::function<double(double)>& f, double t, double x,
                    std::size_t n_paths, std::uint64_t seed, const FkOptions& opt, bool exploratory) {
  if (!exploratory) check_admissible(h, x);
  HTransform T = h_transform(h);
  TestFn g = intertwined(T, TestFn::from_1d(f), h);
  OUParams p;
  Vector x0(1);
  x0[0] = x;
  FkEstimate e = feynman_kac_apply(p, T.potential, g, t, x0, n_paths, seed, opt);
  double scale = std::exp(-0.5 * T.W(x));
  e.value *= scale;
  e.std_error *= scale;
  e.log_value -= 0.5 * T.W(x);
  return e;
}

HessEstimate lh_log_hessian(const Potential1D& h, const TestFn& f, double t, double x, std::size_t n_paths,
                            std::uint64_t seed, const FkOptions& opt, bool exploratory) {
  if (!exploratory) check_admissible(h, x);
  HTransform T = h_transform(h);
  TestFn g = intertwined(T, f, h);
  OUParams p;
  Vector x0(1);
  x0[0] = x;
  HessEstimate e = hess_log_fk(p, T.potential, g, t, x0, n_paths, seed, opt);
  e.value(0, 0) -= 0.5 * (1 - h.d2(x));
  return e;
}

double hess_lower_bound(const Potential1D& h, double t, double x, std::optional<double> sup_v2_value) {
  require(t > 0, ErrorKind::Domain, "hess_lower_bound: t must be positive");
  double s2 = sup_v2_value ? *sup_v2_value : sup_v2(h);
  double ct = specfun::rate_constants(t, 1.0, std::numbers::sqrt2).c_t;
  return -ct * ct - 0.5 * (1 - h.d2(x)) - 0.5 * std::max(0.0, s2);
}

FkEstimate lh_kernel(const Potential1D& h, double s, double x, double y, std::size_t n_paths, std::uint64_t seed,
                     int steps, bool exploratory) {
  require(s > 0, ErrorKind::Domain, "lh_kernel: s must be positive");
  require(n_paths >= 2, ErrorKind::Domain, "lh_kernel: need at least two paths");
  if (!exploratory) check_admissible(h, x);
  HTransform T = h_transform(h);
  OUParams p;
  double var = -std::expm1(-2 * s);
  double log_q = -0.5 * std::log(2 * std::numbers::pi * var) - std::pow(y - std::exp(-s) * x, 2) / (2 * var);
  double log_front = 0.5 * (T.W(y) - T.W(x)) + log_q + log_normalizer(h) + h.h(y);
  if (T.potential.is_zero) {
    FkEstimate e;
    e.log_value = log_front;
    e.value = std::exp(log_front);
    e.n_paths = n_paths;
    return e;
  }
  TimeGrid grid = uniform_grid(s, steps);
  Vector x0(1), y0(1);
  x0[0] = x;
  y0[0] = y;
  std::vector<double> lw(n_paths);
  for (std::size_t i = 0; i < n_paths; ++i) {
    Matrix b = sample_ou_bridge(p, x0, y0, s, grid, seed_derive(seed, "bridge", i));
    double acc = 0;
    for (int k = 0; k <= steps; ++k) {
      double w = (k == 0 || k == steps) ? 0.5 : 1.0;
      acc -= w * (s / steps) * T.V(b(0, k));
    }
    lw[i] = acc;
  }
  double shift = *std::max_element(lw.begin(), lw.end());
  double mean = 0, ss = 0;
  for (double& v : lw) {
    v = std::exp(v - shift);
    mean += v;
  }
  mean /= static_cast<double>(n_paths);
  for (double v : lw) ss += (v - mean) * (v - mean);
  double se = std::sqrt(ss / (n_paths - 1) / n_paths);
  FkEstimate e;
  e.log_value = log_front + shift + std::log(mean);
  e.value = std::exp(e.log_value);
  e.std_error = e.value * se / mean;
  e.n_paths = n_paths;
  return e;
}

}  // namespace semilab::diffusion
