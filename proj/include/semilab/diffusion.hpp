#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace semilab::diffusion {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using TimeGrid = std::vector<double>;

struct OUParams {
  double a = 1.0;
  double sigma = 1.4142135623730951;
  int dim = 1;
};

OUParams ou_params(double a, double sigma, int dim = 1);
// standard deviation of X_t given X_0 per coordinate
double mehler_sd(const OUParams& p, double t);
double alpha_t(const OUParams& p, double t, double s);

TimeGrid uniform_grid(double t, int steps);
void validate_grid(const TimeGrid& grid, double t);

// V with value/gradient/Hessian on raw coordinates; grad and hess may be null
struct Potential {
  int dim = 1;
  std::function<double(const double* x, double* grad, double* hess)> jet;
  double lower_bound = 0.0;
  int growth_degree = 2;
  bool is_zero = false;
  std::string name;

  double operator()(const double* x) const { return jet(x, nullptr, nullptr); }

  static Potential zero(int dim = 1);
  static Potential constant(double c, int dim = 1);
  // curvature |x|^2 / 2 + offset
  static Potential quadratic(double curvature, double offset, int dim = 1);
  static Potential from_1d(std::function<double(double)> v, std::function<double(double)> dv,
                           std::function<double(double)> d2v, double lower_bound, std::string name);
};

// positive test function, log-derivatives optional
struct TestFn {
  int dim = 1;
  std::function<double(const double* x)> value;
  std::function<void(const double* x, double* grad_log, double* hess_log)> log_derivs;
  int growth_degree = 0;

  double operator()(const Vector& x) const { return value(x.data()); }

  static TestFn constant(double c, int dim = 1);
  // height * exp(-|x - center|^2 / (2 variance))
  static TestFn gaussian_bump(const Vector& center, double variance, double height = 1.0);
  static TestFn from_1d(std::function<double(double)> g, int growth_degree = 0);
};

struct MehlerResult {
  double value = 0.0;
  double refinement_gap = 0.0;  // relative change against a finer rule
  bool growth_warning = false;
};

MehlerResult ou_mehler_apply(const OUParams& p, const std::function<double(const Vector&)>& g, double t,
                             const Vector& x, int quad_order = 80);

// d^k/dx^k log P_t g at x, k = 1 or 2, dimension 1, by Gauss-Hermite moments of the tilted law
double ou_log_derivative(const OUParams& p, const std::function<double(double)>& g, double t, double x,
                         int order, int quad_order = 160);

Matrix sample_ou_path(const OUParams& p, const Vector& x, const TimeGrid& grid, std::uint64_t seed);
// columns are the grid times followed by t; the last column equals y
Matrix sample_ou_bridge(const OUParams& p, const Vector& x, const Vector& y, double t, const TimeGrid& grid,
                        std::uint64_t seed);
// conditional mean and variance of the bridge at s, per coordinate
std::pair<double, double> ou_bridge_moments(const OUParams& p, double x, double y, double t, double s);

struct FkOptions {
  int steps = 256;
  std::size_t chunk_paths = 8192;
  unsigned threads = 0;  // 0: hardware concurrency
  double max_reject_fraction = 1e-3;
};

struct FkEstimate {
  double value = 0.0;
  double log_value = 0.0;
  double std_error = 0.0;
  std::size_t n_paths = 0;
  std::size_t rejected = 0;
};

struct GradEstimate {
  Vector value;
  Vector std_error;
  std::size_t n_paths = 0;
};

struct HessEstimate {
  Matrix value;
  Matrix std_error;
  std::size_t n_paths = 0;
};

struct FdEstimate {
  Vector grad;
  Vector grad_se;
  Matrix hess;
  Matrix hess_se;
  Matrix hess_richardson;  // |D(h) - D(2h)| / 3 on the diagonal, discretization estimate
  double h_grad = 0.0;
  double h_hess = 0.0;
  std::size_t n_paths = 0;
};

struct FkPathBatch {
  std::size_t n_paths = 0;
  TimeGrid time_grid;
  std::vector<Matrix> states;
  std::vector<double> log_weights;  // -int V
  std::vector<double> terminal_f;
  std::vector<Vector> a_stat;
  std::uint64_t seed = 0;
};

FkEstimate feynman_kac_apply(const OUParams& p, const Potential& V, const TestFn& f, double t, const Vector& x,
                             std::size_t n_paths, std::uint64_t seed, const FkOptions& opt = {});
FkEstimate feynman_kac_apply(const OUParams& p, const Potential& V, const TestFn& f, double t, const Vector& x,
                             std::size_t n_paths, const TimeGrid& grid, std::uint64_t seed, const FkOptions& opt = {});

Vector a_statistic(const OUParams& p, const Potential& V, const Matrix& path, const TimeGrid& grid, const Vector& x);
FkPathBatch simulate_fk_batch(const OUParams& p, const Potential& V, const TestFn& f, double t, const Vector& x,
                              std::size_t n_paths, const TimeGrid& grid, std::uint64_t seed);

GradEstimate grad_log_fk(const OUParams& p, const Potential& V, const TestFn& f, double t, const Vector& x,
                         std::size_t n_paths, std::uint64_t seed, const FkOptions& opt = {});
HessEstimate hess_log_fk(const OUParams& p, const Potential& V, const TestFn& f, double t, const Vector& x,
                         std::size_t n_paths, std::uint64_t seed, const FkOptions& opt = {});
HessEstimate hess_log_fk_alt(const OUParams& p, const Potential& V, const TestFn& f, double t, const Vector& x,
                             std::size_t n_paths, std::uint64_t seed, const FkOptions& opt = {});
// central differences of ln P_t^V f with common random numbers across the stencil
FdEstimate fd_log_derivatives(const OUParams& p, const Potential& V, const TestFn& f, double t, const Vector& x,
                              std::size_t n_paths, std::uint64_t seed, bool gradient = true, bool hessian = true,
                              const FkOptions& opt = {});

// h on the line with derivatives through order four
struct Potential1D {
  std::function<double(double)> h, d1, d2, d3, d4;
  std::optional<double> v_lower_bound;  // declared lower bound of the derived V; none when unbounded
  double c = 1.0, C = 1.0;              // c <= h'' <= C
  bool symmetric = true;
  std::string name;

  static Potential1D quadratic();
  // x^2/2 + (1+x^2)^{p/2}
  static Potential1D perturbed(double p);
  // x^2/2 + cos x; derived V is unbounded below
  static Potential1D cosine();
};

struct HTransform {
  std::function<double(double)> W;
  std::function<double(double)> V, dV, d2V;
  Potential potential;
};

HTransform h_transform(const Potential1D& h);
double log_normalizer(const Potential1D& h);
// sup of V'' over [-R, R], range error if attained at the boundary
double sup_v2(const Potential1D& h, double R = 30.0);
void check_admissible(const Potential1D& h, double x, double envelope = 10.0);

// L_h semigroup at x by intertwining with the Feynman-Kac semigroup of the OU(1, sqrt 2) process
FkEstimate lh_apply(const Potential1D& h, const std::function<double(double)>& f, double t, double x,
                    std::size_t n_paths, std::uint64_t seed, const FkOptions& opt = {}, bool exploratory = false);
// d^2/dx^2 log of the L_h semigroup: -(1 - h''(x))/2 plus the Feynman-Kac log-Hessian of e^{W/2} f
HessEstimate lh_log_hessian(const Potential1D& h, const TestFn& f, double t, double x, std::size_t n_paths,
                            std::uint64_t seed, const FkOptions& opt = {}, bool exploratory = false);
double hess_lower_bound(const Potential1D& h, double t, double x, std::optional<double> sup_v2_value = std::nullopt);

// transition density of L_h with respect to mu_h, bridge Monte Carlo for the potential factor
FkEstimate lh_kernel(const Potential1D& h, double s, double x, double y, std::size_t n_paths, std::uint64_t seed,
                     int steps = 128, bool exploratory = false);

}  // namespace semilab::diffusion
