#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "semilab/numeric.hpp"
#include "semilab/tail_curve.hpp"

namespace semilab::discrete {

using Index = std::int64_t;

struct MMParams {
  double lambda = 1.0;
  double mu = 1.0;
  double t = 0.0;
  double rho = 1.0;
  double p = 1.0;
  double q = 0.0;
};

MMParams mm_params(double lambda, double mu, double t);
// rho = 1 normalization
MMParams mm_unit(double t);

struct PmfTable {
  std::vector<double> values;
  double truncation_mass = 0.0;
  double total() const;
};

// f on the non-negative integers; log_value is used for positive f and defaults to log(value).
struct FuncOnN {
  std::function<double(Index)> value;
  std::function<double(Index)> log_value;
  std::function<double(Index)> log_ratio;  // optional ln f(k+1) - ln f(k), used by delta_log when set
  std::optional<Index> support;  // f(k) = 0 for k > support
  double log_growth = 0.0;       // sup_k ln f(k+1) - ln f(k) beyond the explicit range

  double operator()(Index k) const { return value(k); }
  double log_at(Index k) const;

  static FuncOnN from_values(std::vector<double> values);
  static FuncOnN from_log(std::function<double(Index)> log_value, double log_growth,
                          std::optional<Index> support = std::nullopt);
  static FuncOnN indicator(Index k);
  static FuncOnN constant(double c);
  static FuncOnN exponential(double lambda, double log_scale = 0.0);
  static FuncOnN poisson_density(double theta);
};

double log_poisson_pmf(double theta, Index k);
double poisson_pmf(double theta, Index k);

struct PoissonTail {
  double exact = 0.0;
  double bound = 0.0;       // (2/sqrt(u)) exp(-Phi_theta(u))
  bool bound_applies = false;  // u >= 2 theta
};

PoissonTail poisson_tail(double theta, Index u);
double log_poisson_tail(double theta, Index u);

// smallest K with the two-over-root-u tail bound at K+1 below cap (and K+1 >= 2 theta)
PmfTable poisson_table(double theta, double cap = 1e-15);

double log_binomial_pmf(Index k, double p, Index i);
double binomial_pmf(Index k, double p, Index i);
Index binomial_mode(Index k, double p);

double log_mm_transition(const MMParams& m, Index n, Index k);
double mm_transition(const MMParams& m, Index n, Index k);
// law of X_t given X_0 = n on 0..K, built by the thinning recurrence
PmfTable mm_law_table(const MMParams& m, Index n, Index K);

double log_mm_apply(const MMParams& m, const FuncOnN& f, Index n, const Accuracy& acc = {});
double mm_apply(const MMParams& m, const FuncOnN& f, Index n, const Accuracy& acc = {});
// ln P_t f(n) for n = 0..n_max, one pass over a shared log-kernel
std::vector<double> log_mm_apply_range(const MMParams& m, const FuncOnN& f, Index n_max,
                                       const Accuracy& acc = {});

double discrete_laplacian(const FuncOnN& f, Index n);
double delta_log(const FuncOnN& f, Index n);
// rounding allowance for delta_log at n, scaled by the size of the logs involved
double delta_log_tolerance(const FuncOnN& f, Index n);
// second difference of a table of logarithms, entries n-1, n, n+1
std::vector<double> delta_log_table(const std::vector<double>& logs);

struct CheckReport {
  std::vector<Index> n;
  std::vector<double> value;
  std::vector<double> bound;
  Index violations = 0;
  Index first_violation = -1;
  double min_margin = kInf;
  std::string note;
};

double mm_loghess_bound(const MMParams& m);
CheckReport check_mm_semilogconvexity(const MMParams& m, const FuncOnN& f, Index n_max);

struct CombinationReport {
  CheckReport combined;
  std::vector<std::size_t> precondition_failures;
};

CombinationReport check_combination_lemma(const std::vector<FuncOnN>& funcs,
                                          const std::vector<double>& betas,
                                          const std::vector<double>& weights, Index n_max);

enum class Preserved { SemiLogConvex, LogConcave };

// LogConcave also reports ultra-log-concavity of P_t f times pi_rho in `note`
CheckReport check_preservation(const MMParams& m, const FuncOnN& f, double beta, Index n_max,
                               Preserved kind);

struct PsiResult {
  double value = 0.0;
  double log_value = 0.0;
  Index argmax = 0;
  Index k_max = 0;
};

PsiResult psi_s(double s, Index n, Index k_max);
PsiResult psi_s_adaptive(double s, Index n);

struct SupResult {
  double log_value = 0.0;
  Index argmax = 0;
};

// sup over f >= 0 with int f dpi_1 = 1 of P_s f(n), in log form
SupResult mm_sup_semigroup(double s, Index n);

struct MMTalagrand {
  TailCurve curve;
  std::vector<Index> threshold;  // n*(t)
  double max_ratio = 0.0;
  bool upper_ray = true;
  Index checked_up_to = 0;
};

double mm_talagrand_envelope(double t);
MMTalagrand mm_talagrand_tail(double s, const std::vector<double>& t_grid, Index ray_check_n = 1000);

struct OptimalityRow {
  Index k = 0;
  double t = 0.0;
  double lambda = 0.0;
  Index threshold = 0;
  double lhs = 0.0;
  double rhs = 0.0;
};

std::vector<OptimalityRow> poisson_optimality(Index k_min, Index k_max);

struct HypercubeSup {
  double value = 0.0;
  double cutoff = 0.0;
};

HypercubeSup hypercube_sup(double s, int n_dim);
// sup over eta of the kernel at sigma, by enumeration
double hypercube_sup_bruteforce(double s, int n_dim, std::uint64_t sigma_bits);

// seeded non-negative test functions: indicators, intervals, sparse spikes, log-linear mixtures
std::vector<FuncOnN> mm_corpus(std::uint64_t seed, std::size_t count, Index support_max = 300);

}  // namespace semilab::discrete
