#include "semilab/discrete.hpp"

#include <algorithm>
#include <memory>
#include <random>

#include "semilab/error.hpp"
#include "semilab/seed.hpp"
#include "semilab/specfun.hpp"

namespace semilab::discrete {

using specfun::log_factorial;

MMParams mm_params(double lambda, double mu, double t) {
  require(lambda > 0 && mu > 0, ErrorKind::Domain, "M/M/inf rates must be positive");
  require(t >= 0 && std::isfinite(t), ErrorKind::Domain, "M/M/inf time must be finite and >= 0");
  MMParams m;
  m.lambda = lambda;
  m.mu = mu;
  m.t = t;
  m.rho = lambda / mu;
  m.p = std::exp(-mu * t);
  m.q = -std::expm1(-mu * t);
  return m;
}

MMParams mm_unit(double t) { return mm_params(1.0, 1.0, t); }

double PmfTable::total() const {
  double s = truncation_mass;
  for (double v : values) s += v;
  return s;
}

double FuncOnN::log_at(Index k) const {
  if (support && k > *support) return -kInf;
  if (log_value) return log_value(k);
  double v = value(k);
  require(v >= 0, ErrorKind::Domain, "log of a negative function value");
  return v > 0 ? std::log(v) : -kInf;
}

FuncOnN FuncOnN::from_values(std::vector<double> values) {
  require(!values.empty(), ErrorKind::Domain, "empty table");
  auto v = std::make_shared<std::vector<double>>(std::move(values));
  FuncOnN f;
  f.value = [v](Index k) { return k >= 0 && k < static_cast<Index>(v->size()) ? (*v)[k] : 0.0; };
  f.support = static_cast<Index>(v->size()) - 1;
  return f;
}

FuncOnN FuncOnN::from_log(std::function<double(Index)> log_value, double log_growth,
                          std::optional<Index> support) {
  FuncOnN f;
  f.log_value = log_value;
  f.value = [log_value](Index k) { return std::exp(log_value(k)); };
  f.log_growth = log_growth;
  f.support = support;
  return f;
}

FuncOnN FuncOnN::indicator(Index j) {
  FuncOnN f = from_log([j](Index k) { return k == j ? 0.0 : -kInf; }, 0.0, j);
  return f;
}

FuncOnN FuncOnN::constant(double c) {
  require(c > 0, ErrorKind::Domain, "constant must be positive");
  double lc = std::log(c);
  return from_log([lc](Index) { return lc; }, 0.0);
}

FuncOnN FuncOnN::exponential(double lambda, double log_scale) {
  return from_log([lambda, log_scale](Index k) { return log_scale + lambda * static_cast<double>(k); },
                  lambda);
}

FuncOnN FuncOnN::poisson_density(double theta) {
  FuncOnN f = from_log([theta](Index k) { return log_poisson_pmf(theta, k); }, std::log(theta));
  const double lt = std::log(theta);
  f.log_ratio = [lt](Index k) { return lt - std::log(static_cast<double>(k + 1)); };
  return f;
}

double log_poisson_pmf(double theta, Index k) {
  require(theta >= 0, ErrorKind::Domain, "Poisson parameter must be >= 0");
  if (k < 0) return -kInf;
  if (theta == 0) return k == 0 ? 0.0 : -kInf;
  return -theta + static_cast<double>(k) * std::log(theta) - log_factorial(static_cast<std::uint64_t>(k));
}

double poisson_pmf(double theta, Index k) { return std::exp(log_poisson_pmf(theta, k)); }

double log_poisson_tail(double theta, Index u) {
  require(theta >= 0, ErrorKind::Domain, "Poisson parameter must be >= 0");
  if (u <= 0) return 0.0;
  if (theta == 0) return -kInf;
  double head = log_poisson_pmf(theta, u);
  double term = 1.0, sum = 1.0;
  for (Index k = u;; ++k) {
    double r = theta / static_cast<double>(k + 1);
    term *= r;
    sum += term;
    if (r < 1.0 && term * r / (1.0 - r) <= 1e-17 * sum) break;
    if (term > 1e250) {
      head += std::log(term);
      sum /= term;
      term = 1.0;
    }
  }
  return std::min(0.0, head + std::log(sum));
}

PoissonTail poisson_tail(double theta, Index u) {
  PoissonTail out;
  out.exact = std::exp(log_poisson_tail(theta, u));
  if (u >= 1) {
    double ud = static_cast<double>(u);
    out.bound = 2.0 / std::sqrt(ud) * std::exp(-specfun::phi_theta(theta, ud));
    out.bound_applies = ud >= 2.0 * theta;
  } else {
    out.bound = kInf;
  }
  return out;
}

PmfTable poisson_table(double theta, double cap) {
  require(theta > 0, ErrorKind::Domain, "Poisson parameter must be > 0");
  Index K = 0;
  while (true) {
    Index u = K + 1;
    if (static_cast<double>(u) >= 2 * theta) {
      double b = 2.0 / std::sqrt(static_cast<double>(u)) * std::exp(-specfun::phi_theta(theta, static_cast<double>(u)));
      if (b <= cap) break;
    }
    ++K;
  }
  PmfTable t;
  t.values.resize(K + 1);
  for (Index k = 0; k <= K; ++k) t.values[k] = poisson_pmf(theta, k);
  t.truncation_mass = std::exp(log_poisson_tail(theta, K + 1));
  return t;
}

double log_binomial_pmf(Index k, double p, Index i) {
  require(k >= 0 && p >= 0 && p <= 1, ErrorKind::Domain, "binomial needs k >= 0 and p in [0,1]");
  if (i < 0 || i > k) return -kInf;
  if (p == 0) return i == 0 ? 0.0 : -kInf;
  if (p == 1) return i == k ? 0.0 : -kInf;
  auto ku = static_cast<std::uint64_t>(k), iu = static_cast<std::uint64_t>(i);
  return log_factorial(ku) - log_factorial(iu) - log_factorial(ku - iu) + static_cast<double>(i) * std::log(p) +
         static_cast<double>(k - i) * std::log1p(-p);
}

double binomial_pmf(Index k, double p, Index i) { return std::exp(log_binomial_pmf(k, p, i)); }

Index binomial_mode(Index k, double p) {
  auto m = static_cast<Index>(std::floor(static_cast<double>(k + 1) * p));
  return std::clamp<Index>(m, 0, k);
}

double log_mm_transition(const MMParams& m, Index n, Index k) {
  require(n >= 0, ErrorKind::Domain, "initial state must be >= 0");
  if (k < 0) return -kInf;
  const double theta = m.rho * m.q, p = m.p;
  if (theta == 0) return log_binomial_pmf(n, p, k);
  const Index hi = std::min(n, k);
  if (p == 0 || n == 0) return log_poisson_pmf(theta, k);
  auto term = [&](Index i) { return log_binomial_pmf(n, p, i) + log_poisson_pmf(theta, k - i); };
  Index i0 = integer_argmax(term, 0, hi);
  const double peak = term(i0);
  const double odds = p / (1.0 - p);
  double sum = 1.0, cur = 1.0;
  for (Index i = i0; i < hi; ++i) {
    double r = static_cast<double>(n - i) / static_cast<double>(i + 1) * odds * static_cast<double>(k - i) / theta;
    cur *= r;
    sum += cur;
    if (cur == 0 || (r < 1.0 && cur * r / (1.0 - r) <= 1e-18 * sum)) break;
  }
  cur = 1.0;
  for (Index i = i0; i > 0; --i) {
    double r = static_cast<double>(i) / static_cast<double>(n - i + 1) / odds * theta / static_cast<double>(k - i + 1);
    cur *= r;
    sum += cur;
    if (cur == 0 || (r < 1.0 && cur * r / (1.0 - r) <= 1e-18 * sum)) break;
  }
  return peak + std::log(sum);
}

double mm_transition(const MMParams& m, Index n, Index k) { return std::exp(log_mm_transition(m, n, k)); }

namespace {

// one step of the thinning recurrence: X_{n+1} = X_n + Bernoulli(p)
void thin_step(std::vector<double>& row, double log_p, double log_1mp) {
  for (std::size_t k = row.size(); k-- > 0;) {
    double stay = log_1mp + row[k];
    double move = k > 0 ? log_p + row[k - 1] : -kInf;
    row[k] = log_add_exp(stay, move);
  }
}

std::vector<double> initial_row(const MMParams& m, Index K) {
  std::vector<double> row(K + 1);
  for (Index k = 0; k <= K; ++k) row[k] = log_poisson_pmf(m.rho * m.q, k);
  return row;
}

}  // namespace

PmfTable mm_law_table(const MMParams& m, Index n, Index K) {
  require(n >= 0 && K >= 0, ErrorKind::Domain, "table needs n, K >= 0");
  auto row = initial_row(m, K);
  double trunc = std::exp(log_poisson_tail(m.rho * m.q, K + 1));
  const double lp = std::log(m.p), l1p = std::log1p(-m.p);
  for (Index j = 0; j < n; ++j) {
    trunc += m.p * std::exp(row[K]);
    thin_step(row, lp, l1p);
  }
  PmfTable t;
  t.values.resize(K + 1);
  for (Index k = 0; k <= K; ++k) t.values[k] = std::exp(row[k]);
  t.truncation_mass = trunc;
  return t;
}

namespace {

// Sums exp(log f(k) + log P(k|n)) over k with a tail bound from the decreasing ratio of the law
// and the declared log-growth of f. Returns the log of the sum.
template <class Visit>
double sweep_row(const MMParams& m, const FuncOnN& f, Index n, const Accuracy& acc, Visit visit) {
  const double mean = static_cast<double>(n) * m.p + m.rho * m.q;
  const Index k_settle = static_cast<Index>(mean + 12.0 * std::sqrt(mean + 1.0)) + 8;
  const Index k_cap = std::max<Index>(10000000, 4 * k_settle);
  double acc_log = -kInf;
  Index last_pos = -1;
  double last_logf = -kInf;
  double prev_lp = -kInf;
  for (Index k = 0;; ++k) {
    if (f.support && k > *f.support) break;
    const double lp = log_mm_transition(m, n, k);
    const double lf = f.log_at(k);
    if (lf > -kInf) {
      visit(k, lp);
      acc_log = log_add_exp(acc_log, lf + lp);
      last_pos = k;
      last_logf = lf;
    }
    if (!f.support && k > k_settle && last_pos >= 0) {
      double r = std::exp(lp - prev_lp + f.log_growth);
      if (r < 1.0) {
        double lb = last_logf + f.log_growth * static_cast<double>(k - last_pos) + lp + std::log(r / (1.0 - r));
        double target = std::max(std::log(acc.rel_tol) + acc_log, acc.abs_tol > 0 ? std::log(acc.abs_tol) : -kInf);
        if (lb <= target) break;
      }
    }
    if (k > k_cap) fail(ErrorKind::Growth, "semigroup series does not settle; declared growth too large");
    prev_lp = lp;
  }
  return acc_log;
}

}  // namespace

double log_mm_apply(const MMParams& m, const FuncOnN& f, Index n, const Accuracy& acc) {
  return sweep_row(m, f, n, acc, [](Index, double) {});
}

double mm_apply(const MMParams& m, const FuncOnN& f, Index n, const Accuracy& acc) {
  if (f.log_value) return std::exp(log_mm_apply(m, f, n, acc));
  double sum = 0.0;
  FuncOnN mag = f;
  mag.log_value = [&f](Index k) {
    double v = std::abs(f.value(k));
    return v > 0 ? std::log(v) : -kInf;
  };
  sweep_row(m, mag, n, acc, [&](Index k, double lp) { sum += f.value(k) * std::exp(lp); });
  return sum;
}

std::vector<double> log_mm_apply_range(const MMParams& m, const FuncOnN& f, Index n_max, const Accuracy& acc) {
  require(n_max >= 0, ErrorKind::Domain, "n_max must be >= 0");
  const double lp = std::log(m.p), l1p = std::log1p(-m.p);
  Index K;
  if (f.support) {
    K = *f.support;
  } else {
    double mean = static_cast<double>(n_max) * m.p + m.rho * m.q;
    K = static_cast<Index>(mean + 12.0 * std::sqrt(mean + 1.0)) + 32;
  }
  std::vector<double> logf;
  for (int attempt = 0; attempt < 12; ++attempt) {
    logf.resize(K + 1);
    Index last_pos = -1;
    for (Index k = 0; k <= K; ++k) {
      logf[k] = f.log_at(k);
      if (logf[k] > -kInf) last_pos = k;
    }
    require(last_pos >= 0, ErrorKind::Degenerate, "function vanishes on the truncated range");
    auto row = initial_row(m, K);
    std::vector<double> out(n_max + 1);
    bool ok = true;
    std::vector<double> terms(K + 1);
    for (Index n = 0; n <= n_max && ok; ++n) {
      for (Index k = 0; k <= K; ++k) terms[k] = logf[k] + row[k];
      out[n] = log_sum_exp(terms);
      if (!f.support) {
        double r = std::exp(row[K] - row[K - 1] + f.log_growth);
        if (!(r < 0.5)) {
          ok = false;
          break;
        }
        double lb = logf[last_pos] + f.log_growth * static_cast<double>(K - last_pos) + row[K] + std::log(r / (1.0 - r));
        if (lb > out[n] + std::log(acc.rel_tol)) ok = false;
      }
      if (n < n_max) thin_step(row, lp, l1p);
    }
    if (ok) return out;
    K *= 2;
  }
  fail(ErrorKind::Growth, "semigroup series does not settle; declared growth too large");
}

double discrete_laplacian(const FuncOnN& f, Index n) {
  require(n >= 1, ErrorKind::Domain, "Laplacian needs n >= 1");
  return f(n + 1) + f(n - 1) - 2.0 * f(n);
}

double delta_log(const FuncOnN& f, Index n) {
  require(n >= 1, ErrorKind::Domain, "delta_log needs n >= 1");
  double a = f.log_at(n - 1), b = f.log_at(n), c = f.log_at(n + 1);
  require(a > -kInf && b > -kInf && c > -kInf, ErrorKind::Domain, "delta_log needs positive values");
  if (f.log_ratio) return f.log_ratio(n) - f.log_ratio(n - 1);
  return (c - b) - (b - a);
}

double delta_log_tolerance(const FuncOnN& f, Index n) {
  if (f.log_ratio) return 1e-12;
  double m = std::max({std::abs(f.log_at(n - 1)), std::abs(f.log_at(n)), std::abs(f.log_at(n + 1))});
  return 1e-12 + 8.0 * 2.2e-16 * m;
}

std::vector<double> delta_log_table(const std::vector<double>& logs) {
  std::vector<double> d;
  for (std::size_t n = 1; n + 1 < logs.size(); ++n) {
    require(logs[n - 1] > -kInf && logs[n] > -kInf && logs[n + 1] > -kInf, ErrorKind::Domain,
            "delta_log needs positive values");
    d.push_back(logs[n + 1] + logs[n - 1] - 2.0 * logs[n]);
  }
  return d;
}

double mm_loghess_bound(const MMParams& m) {
  const double p = m.p, d = p + m.rho * (1 - p) * (1 - p);
  return std::log((1.0 / 12.0) * (1.0 - p * p / (d * d)));
}

namespace {

void record(CheckReport& r, Index n, double value, double bound, double margin) {
  r.n.push_back(n);
  r.value.push_back(value);
  r.bound.push_back(bound);
  r.min_margin = std::min(r.min_margin, margin);
  if (margin < 0) {
    if (r.violations == 0) r.first_violation = n;
    ++r.violations;
  }
}

}  // namespace

CheckReport check_mm_semilogconvexity(const MMParams& m, const FuncOnN& f, Index n_max) {
  auto logs = log_mm_apply_range(m, f, n_max + 1);
  auto d = delta_log_table(logs);
  const double b = mm_loghess_bound(m);
  CheckReport r;
  for (Index n = 1; n <= n_max; ++n) record(r, n, d[n - 1], b, d[n - 1] - b);
  return r;
}

CombinationReport check_combination_lemma(const std::vector<FuncOnN>& funcs, const std::vector<double>& betas,
                                          const std::vector<double>& weights, Index n_max) {
  require(!funcs.empty() && funcs.size() == betas.size() && funcs.size() == weights.size(), ErrorKind::Domain,
          "combination needs matching non-empty lists");
  CombinationReport out;
  for (std::size_t i = 0; i < funcs.size(); ++i) {
    require(weights[i] > 0, ErrorKind::Domain, "combination weights must be positive");
    for (Index n = 1; n <= n_max; ++n)
      if (delta_log(funcs[i], n) < -betas[i] - delta_log_tolerance(funcs[i], n)) {
        out.precondition_failures.push_back(i);
        break;
      }
  }
  if (!out.precondition_failures.empty()) {
    out.combined.note = "precondition failed";
    return out;
  }
  const double bmax = *std::max_element(betas.begin(), betas.end());
  std::vector<double> logs(n_max + 2), parts(funcs.size());
  for (Index k = 0; k <= n_max + 1; ++k) {
    for (std::size_t i = 0; i < funcs.size(); ++i) parts[i] = std::log(weights[i]) + funcs[i].log_at(k);
    logs[k] = log_sum_exp(parts);
  }
  auto d = delta_log_table(logs);
  for (Index n = 1; n <= n_max; ++n) record(out.combined, n, d[n - 1], -bmax, d[n - 1] + bmax + 1e-12);
  return out;
}

CheckReport check_preservation(const MMParams& m, const FuncOnN& f, double beta, Index n_max, Preserved kind) {
  require(beta >= 0, ErrorKind::Domain, "beta must be >= 0");
  const Index n_in = f.support ? std::max<Index>(n_max, *f.support - 1) : n_max + 100;
  for (Index n = 1; n <= n_in; ++n) {
    double d = delta_log(f, n), tol = delta_log_tolerance(f, n);
    bool ok = kind == Preserved::SemiLogConvex ? d >= -beta - tol : d <= tol;
    if (!ok) fail(ErrorKind::Precondition, "input property fails at n = " + std::to_string(n));
  }
  auto logs = log_mm_apply_range(m, f, n_max + 1);
  auto d = delta_log_table(logs);
  CheckReport r;
  Index ulc_bad = 0;
  for (Index n = 1; n <= n_max; ++n) {
    double v = d[n - 1];
    if (kind == Preserved::SemiLogConvex) {
      record(r, n, v, -beta, v + beta + 1e-10);
    } else {
      record(r, n, v, 0.0, 1e-10 - v);
      // h_t = P_t f * pi_rho is ultra-log-concave iff Delta log h_t(n) <= ln(n/(n+1))
      double lh = v + std::log(static_cast<double>(n) / static_cast<double>(n + 1));
      if (lh > std::log(static_cast<double>(n) / static_cast<double>(n + 1)) + 1e-10) ++ulc_bad;
    }
  }
  if (kind == Preserved::LogConcave) r.note = "ulc_violations=" + std::to_string(ulc_bad);
  return r;
}

PsiResult psi_s(double s, Index n, Index k_max) {
  require(s > 0, ErrorKind::Domain, "psi_s needs s > 0");
  require(n >= 0 && k_max >= 1, ErrorKind::Domain, "psi_s needs n >= 0, k_max >= 1");
  const MMParams m = mm_unit(s);
  auto g = [&](Index k) { return log_mm_transition(m, k, n); };
  Index k = integer_argmax(g, 0, k_max);
  if (k >= k_max) fail(ErrorKind::Range, "sup attained at k_max; increase k_max");
  PsiResult r;
  r.argmax = k;
  r.k_max = k_max;
  r.log_value = 1.0 + g(k);
  r.value = std::exp(r.log_value);
  return r;
}

PsiResult psi_s_adaptive(double s, Index n) {
  Index k_max = static_cast<Index>(2.0 * std::ceil(static_cast<double>(n) * std::exp(s))) + 32;
  for (int i = 0; i < 40; ++i) {
    const MMParams m = mm_unit(s);
    auto g = [&](Index k) { return log_mm_transition(m, k, n); };
    Index k = integer_argmax(g, 0, k_max);
    if (k + 10 <= k_max) return psi_s(s, n, k_max);
    k_max *= 2;
  }
  fail(ErrorKind::Range, "psi_s supremum not localized");
}

SupResult mm_sup_semigroup(double s, Index n) {
  auto p = psi_s_adaptive(s, n);
  return {log_factorial(static_cast<std::uint64_t>(n)) + p.log_value, p.argmax};
}

double mm_talagrand_envelope(double t) {
  require(t > std::exp(1.0), ErrorKind::Domain, "envelope needs ln ln t > 0");
  const double lt = std::log(t);
  return std::sqrt(std::log(lt)) / (t * std::sqrt(lt));
}

MMTalagrand mm_talagrand_tail(double s, const std::vector<double>& t_grid, Index ray_check_n) {
  require(!t_grid.empty(), ErrorKind::Domain, "empty t grid");
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    require(t_grid[i] >= 4.0, ErrorKind::Domain, "t grid must be >= 4");
    require(i == 0 || t_grid[i] > t_grid[i - 1], ErrorKind::Domain, "t grid must increase");
  }
  const double lt_max = std::log(t_grid.back());
  std::vector<double> L;
  for (Index n = 0;; ++n) {
    L.push_back(mm_sup_semigroup(s, n).log_value);
    if (n >= ray_check_n && L.back() >= lt_max) break;
  }
  MMTalagrand out;
  out.checked_up_to = static_cast<Index>(L.size()) - 1;
  // upper ray for every level >= ln 4: once L reaches ln 4 it never drops below a level it passed
  double run_max = -kInf;
  for (double v : L) {
    if (run_max >= std::log(4.0) && v < run_max) out.upper_ray = false;
    run_max = std::max(run_max, v);
  }
  out.curve.label = "mm-talagrand s=" + std::to_string(s);
  out.curve.envelope = "sqrt(ln ln t)/(t sqrt(ln t))";
  for (double t : t_grid) {
    const double lt = std::log(t);
    Index ns = 0;
    while (L[ns] < lt) ++ns;
    double tail = std::exp(log_poisson_tail(1.0, ns));
    double ratio = tail / mm_talagrand_envelope(t);
    out.max_ratio = std::max(out.max_ratio, ratio);
    out.threshold.push_back(ns);
    out.curve.points.push_back({t, tail, 0.0});
  }
  out.curve.fitted_constant = out.max_ratio;
  for (auto& pt : out.curve.points) pt.bound = out.max_ratio * mm_talagrand_envelope(pt.t);
  return out;
}

std::vector<OptimalityRow> poisson_optimality(Index k_min, Index k_max) {
  require(k_min >= 3 && k_max >= k_min, ErrorKind::Domain, "optimality family needs 3 <= k_min <= k_max");
  std::vector<OptimalityRow> rows;
  for (Index k = k_min; k <= k_max; ++k) {
    OptimalityRow r;
    const double kd = static_cast<double>(k);
    r.k = k;
    r.lambda = std::log(kd);
    const double lt = 1.0 + kd * std::log(kd) - kd;
    const double lc = 1.0 - kd;
    r.t = std::exp(lt);
    const double level = (lt - lc) / r.lambda;
    r.threshold = static_cast<Index>(std::ceil(level - 1e-9));
    const double ltail = log_poisson_tail(1.0, r.threshold);
    r.lhs = std::exp(lt + 0.5 * std::log(lt) - 0.5 * std::log(std::log(lt)) + ltail);
    r.rhs = std::sqrt(lt / (kd * std::log(lt))) / 3.0;
    rows.push_back(r);
  }
  return rows;
}

HypercubeSup hypercube_sup(double s, int n_dim) {
  require(s > 0 && n_dim >= 1, ErrorKind::Domain, "hypercube needs s > 0, n >= 1");
  double v = std::pow(1.0 + std::exp(-s), n_dim);
  return {v, v};
}

double hypercube_sup_bruteforce(double s, int n_dim, std::uint64_t sigma_bits) {
  require(n_dim >= 1 && n_dim <= 24, ErrorKind::Domain, "enumeration limited to n <= 24");
  const double e = std::exp(-s);
  double best = 0.0;
  for (std::uint64_t eta = 0; eta < (1ULL << n_dim); ++eta) {
    double k = 1.0;
    for (int i = 0; i < n_dim; ++i) {
      double si = (sigma_bits >> i) & 1 ? 1.0 : -1.0, ei = (eta >> i) & 1 ? 1.0 : -1.0;
      k *= 1.0 + e * si * ei;
    }
    best = std::max(best, k);
  }
  return best;
}

std::vector<FuncOnN> mm_corpus(std::uint64_t seed, std::size_t count, Index support_max) {
  std::vector<FuncOnN> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::mt19937_64 rng(seed_derive(seed, "mm-corpus", i));
    std::uniform_int_distribution<Index> pos(0, support_max);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    switch (i % 5) {
      case 0:
        out.push_back(FuncOnN::indicator(pos(rng)));
        break;
      case 1: {
        Index a = pos(rng), w = 1 + static_cast<Index>(u(rng) * 20);
        out.push_back(FuncOnN::from_log([a, w](Index k) { return k >= a && k <= a + w ? 0.0 : -kInf; }, 0.0, a + w));
        break;
      }
      case 2: {
        int m = 2 + static_cast<int>(u(rng) * 5);
        std::vector<double> vals(support_max + 1, 0.0);
        for (int j = 0; j < m; ++j) vals[pos(rng)] += std::exp(-5.0 + 10.0 * u(rng));
        Index last = support_max;
        while (vals[last] == 0) --last;
        vals.resize(last + 1);
        out.push_back(FuncOnN::from_values(vals));
        break;
      }
      case 3: {
        int m = 1 + static_cast<int>(u(rng) * 4);
        std::vector<double> lam(m), lw(m);
        double g = -kInf;
        for (int j = 0; j < m; ++j) {
          lam[j] = -2.0 + 3.5 * u(rng);
          lw[j] = -3.0 + 6.0 * u(rng);
          g = std::max(g, lam[j]);
        }
        out.push_back(FuncOnN::from_log(
            [lam, lw](Index k) {
              std::vector<double> t(lam.size());
              for (std::size_t j = 0; j < lam.size(); ++j) t[j] = lw[j] + lam[j] * static_cast<double>(k);
              return log_sum_exp(t);
            },
            g));
        break;
      }
      default: {
        Index S = 5 + static_cast<Index>(u(rng) * 55);
        std::vector<double> vals(S + 1);
        for (auto& v : vals) v = std::exp(-10.0 + 20.0 * u(rng));
        out.push_back(FuncOnN::from_values(vals));
        break;
      }
    }
  }
  return out;
}

}  // namespace semilab::discrete
