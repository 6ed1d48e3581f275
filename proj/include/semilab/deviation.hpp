#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "semilab/diffusion.hpp"
#include "semilab/discrete.hpp"
#include "semilab/tail_curve.hpp"

namespace semilab::deviation {

using diffusion::Potential1D;

// Legendre transform of g restricted to [lo, hi]; g must be convex there
std::vector<double> convex_conjugate(const std::function<double(double)>& g, double lo, double hi,
                                     const std::vector<double>& y_grid, std::size_t n_grid = 4001);
// g** on x_grid, with slopes taken over the range of g' on [lo, hi]
std::vector<double> biconjugate(const std::function<double(double)>& g, double lo, double hi,
                                const std::vector<double>& x_grid, std::size_t n_grid = 4001);

// phi = log f with phi'' >= -beta
struct SemiConvexFn {
  std::function<double(double)> phi;
  double beta = 0.0;
  std::string name;
};

// largest violation of phi'' >= -beta by second differences on [lo, hi]; precondition error beyond tol
void check_semiconvex(const SemiConvexFn& f, double lo, double hi, double tol = 1e-6);

// ln of the normalizing constant making e^{-h} a probability density
double log_mass(const Potential1D& h);
// ln int e^{phi} dmu_h, mu_h normalized
double log_integral(const Potential1D& h, const std::function<double(double)>& phi);
// mu_h({phi >= level})
double superlevel_measure(const Potential1D& h, const std::function<double(double)>& phi, double level);

struct SupBoundReport {
  std::vector<double> x, lhs, rhs;
  std::size_t violations = 0;
  double min_margin = 0.0;
};

SupBoundReport check_semiconvex_sup_bound(const Potential1D& h, const SemiConvexFn& f,
                                          const std::vector<double>& x_grid);

struct DeviationCurve {
  TailCurve curve;
  std::size_t violations = 0;
};

// mu_h(f >= t int f dmu_h) against ((C+beta)/c) / (t sqrt(ln t))
DeviationCurve deviation_bound_diffusion(const Potential1D& h, const SemiConvexFn& f, const std::vector<double>& t_grid);

// seeded semi-log-convex corpus: log-linear mixtures, bumps with curvature -beta, mixed products
std::vector<SemiConvexFn> semiconvex_corpus(std::uint64_t seed, std::size_t count, double beta);

struct PoissonDeviation {
  TailCurve curve;                  // envelope sqrt(ln ln t)/(t sqrt(ln t)), fitted constant
  std::size_t proof_bound_violations = 0;  // against 2 / (t sqrt(Phi^{-1}(ln t))) where it applies
  std::size_t proof_bound_checked = 0;
  double mass = 0.0;
};

double poisson_deviation_envelope(double t);
PoissonDeviation poisson_logconvex_deviation(double theta, const discrete::FuncOnN& f, const std::vector<double>& t_grid);

struct CounterexampleRow {
  double a = 0.0;
  discrete::Index u = 0;
  double u_solved = 0.0;
  double T = 0.0;
  double log_T = 0.0;
  double tail = 0.0;
  double product = 0.0;
};

struct CounterexampleReport {
  double theta = 0.0, beta = 0.0;
  double c_beta = 0.0;
  double floor = 0.0;  // e^{c_beta}
  std::vector<CounterexampleRow> rows;
  double min_margin = 0.0;  // min product - floor
  bool concave = true;
  bool root_check = true;  // u_a from the digamma root equals the integer
  bool above_sqrt_a = true;
  bool increasing_tail_T = true;
};

double c_beta(double beta);
// ln sum_n exp(-beta/2 (n-a)^2) pi_theta(n), i.e. -Z(a)
double log_gauss_poisson_mass(double theta, double beta, double a);
// maximizer of Psi_a(u) by the digamma root
double u_of_a(double theta, double beta, double a);
CounterexampleReport poisson_counterexample(double theta, double beta, double a_lo, double a_hi,
                                            std::size_t min_hits = 10);

struct DiffusionTalagrand {
  TailCurve curve;
  double beta = 0.0;
  double sup_v2 = 0.0;
  std::size_t violations = 0;
  bool exploratory = false;
  std::vector<std::string> corpus;
};

struct TalagrandOptions {
  std::size_t n_paths = 4000;
  int steps = 64;
  int x_points = 121;
  double x_range = 6.0;
  std::size_t corpus_size = 6;
  bool include_spike = true;
  std::uint64_t seed = 1;
};

// h symmetric; the cosine perturbation runs as exploratory with fitted constants only
DiffusionTalagrand talagrand_diffusion_experiment(const Potential1D& h, double s, const std::vector<double>& t_grid,
                                                  const TalagrandOptions& opt = {});

}  // namespace semilab::deviation
