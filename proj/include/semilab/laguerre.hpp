#pragma once

#include <functional>
#include <vector>

#include "semilab/tail_curve.hpp"

namespace semilab::laguerre {

// Gamma(alpha, 1) law on (0, inf)
struct GammaMeasure {
  double alpha = 1.0;

  double log_density(double x) const;
  double density(double x) const;
  // nu([a, b]) with a, b clipped to [0, inf]
  double mass(double a, double b) const;
  double log_upper_tail(double x) const;
};

GammaMeasure gamma_measure(double alpha);

struct KernelParams {
  double alpha = 1.5;
  double t = 1.0;
  double c_t = 0.0;  // 2 e^{t/2} / (e^t - 1)
};

KernelParams kernel_params(double alpha, double t);

// generalized Laguerre polynomial of the Rodrigues normalization, Q_1 = alpha - x; k <= 10
double laguerre_poly(double alpha, int k, double x);
// |L Q_k + k Q_k| at x with L f = x f'' + (alpha - x) f'
double generator_check(double alpha, int k, double x);

// ln G_t(x, y) with respect to nu_alpha; y = 0 (or x = 0) gives the boundary limit
double log_kernel(const KernelParams& p, double x, double y);
double laguerre_kernel(const KernelParams& p, double x, double y);

struct ApplyOptions {
  double growth = 0.0;  // |f(y)| <= C e^{growth y} (1 + y)^k; must stay below 1
  double abs_tol = 0.0;
  double rel_tol = 1e-12;
};

double laguerre_apply(double alpha, const std::function<double(double)>& f, double t, double x,
                      const ApplyOptions& opt = {});

// alpha = 3/2: second x-derivative of ln G_t(x, y)
double log_hess_32_scalar(double z);  // 2 - z^2/sinh^2 z - z coth z
double log_hess_32(double t, double x, double y);

struct UnboundednessReport {
  double min_value = 0.0;
  double argmin_x = 0.0, argmin_y = 0.0;
  double max_value = 0.0;          // must be <= 0
  bool monotone_in_y = true;       // decreasing along the y grid at every x
  std::vector<double> asymptotic_ratio;  // per x: value / (-c_t sqrt(y/x) / (4x)) at the largest y
};

UnboundednessReport log_hess_unboundedness(double t, const std::vector<double>& x_grid, const std::vector<double>& y_grid);

struct GammaCounterexampleRow {
  double a = 0.0;
  double Z = 0.0;
  double log_t = 0.0;
  double radius = 0.0;  // superlevel set is [a - radius, a + radius]
  double tail = 0.0;
  double product = 0.0;  // t(a) * tail
  double window_ratio = 0.0;  // nu([a-1, a+1]) / phi_alpha(a)
};

struct GammaCounterexampleReport {
  double alpha = 0.0, beta = 0.0;
  double c_fit = 0.0;  // max over the grid of e^{-Z(a)} / phi_alpha(a)
  std::vector<GammaCounterexampleRow> rows;
  double floor = 0.0;         // min product
  double min_window_ratio = 0.0;
  double min_radius = 0.0;    // >= 1 by construction of t(a)
};

// Z(a) = -ln int exp(-beta/2 (x - a)^2) dnu_alpha
double gamma_gauss_log_norm(double alpha, double beta, double a);
GammaCounterexampleReport gamma_counterexample(double alpha, double beta, const std::vector<double>& a_grid);

struct SupKernel {
  double x = 0.0;
  double y_star = 0.0;  // 0 when the supremum is the y -> 0 limit
  double log_value = 0.0;
};

// sup_y G_s(x, y) by golden search in ln y after a unimodality check on a grid
SupKernel sup_kernel(double alpha, double s, double x);

struct LaguerreTalagrand {
  TailCurve curve;  // envelope 1/(t sqrt(ln t)), fitted constant
  std::vector<SupKernel> profile;
  double tail_ratio_last = 0.0;  // tail t sqrt(ln t) at the largest t
};

LaguerreTalagrand laguerre_talagrand_tail(double alpha, double s, const std::vector<double>& t_grid);

}  // namespace semilab::laguerre
