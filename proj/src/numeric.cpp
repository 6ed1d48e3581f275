#include "semilab/numeric.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <queue>

#include "semilab/error.hpp"

namespace semilab {

double log_sum_exp(std::span<const double> xs) {
  double m = -kInf;
  for (double x : xs) m = std::max(m, x);
  if (m == -kInf) return -kInf;
  if (m == kInf) return kInf;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

double log_sub_exp(double a, double b) {
  require(a >= b, ErrorKind::Domain, "log_sub_exp needs a >= b");
  if (b == -kInf) return a;
  return a + std::log(-std::expm1(b - a));
}

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> v(n);
  if (n == 1) {
    v[0] = a;
    return v;
  }
  for (std::size_t i = 0; i < n; ++i) v[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  v.back() = b;
  return v;
}

std::vector<double> logspace(double a, double b, std::size_t n) {
  require(a > 0 && b > 0, ErrorKind::Domain, "logspace needs positive endpoints");
  auto v = linspace(std::log(a), std::log(b), n);
  for (double& x : v) x = std::exp(x);
  if (n > 0) {
    v.front() = a;
    v.back() = b;
  }
  return v;
}

double solve_increasing(const std::function<double(double)>& f, double lo, double hi,
                        double target, double x_tol) {
  double flo = f(lo) - target, fhi = f(hi) - target;
  require(flo <= 0 && fhi >= 0, ErrorKind::Domain, "root not bracketed");
  if (flo == 0) return lo;
  if (fhi == 0) return hi;
  auto tol = [&](double x) { return x_tol * std::max(1.0, std::abs(x)); };
  while (hi - lo > 1e-3 * std::max(1.0, std::abs(hi))) {
    double mid = 0.5 * (lo + hi);
    double fm = f(mid) - target;
    if (fm == 0) return mid;
    if (fm < 0) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
      fhi = fm;
    }
  }
  int side = 0;
  for (int it = 0; it < 200 && hi - lo > tol(lo); ++it) {
    double x = (lo * fhi - hi * flo) / (fhi - flo);
    if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
    double fx = f(x) - target;
    if (fx == 0) return x;
    if (fx < 0) {
      lo = x;
      flo = fx;
      if (side == -1) fhi *= 0.5;
      side = -1;
    } else {
      hi = x;
      fhi = fx;
      if (side == 1) flo *= 0.5;
      side = 1;
    }
  }
  return std::abs(flo) < std::abs(fhi) ? lo : hi;
}

double golden_max(const std::function<double(double)>& f, double lo, double hi, double x_tol) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
  double fc = f(c), fd = f(d);
  while (hi - lo > x_tol * std::max(1.0, std::abs(c))) {
    if (fc >= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - g * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + g * (hi - lo);
      fd = f(d);
    }
  }
  return fc >= fd ? c : d;
}

long long integer_argmax(const std::function<double(long long)>& f, long long lo, long long hi) {
  while (hi - lo > 6) {
    long long m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
    if (f(m1) < f(m2))
      lo = m1 + 1;
    else
      hi = m2;
  }
  long long best = lo;
  double fb = f(lo);
  for (long long k = lo + 1; k <= hi; ++k) {
    double v = f(k);
    if (v > fb) {
      fb = v;
      best = k;
    }
  }
  return best;
}

namespace {

constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.0};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Piece {
  double a, b, value, error;
  bool operator<(const Piece& o) const { return error < o.error; }
};

Piece gk15(const std::function<double(double)>& f, double a, double b, int& evals) {
  double c = 0.5 * (a + b), h = 0.5 * (b - a);
  double fc = f(c);
  double rk = fc * kWgk[7], rg = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    double dx = h * kXgk[j];
    double s = f(c - dx) + f(c + dx);
    rk += kWgk[j] * s;
    if (j % 2 == 1) rg += kWg[j / 2] * s;
  }
  evals += 15;
  double err = std::abs((rk - rg) * h);
  return {a, b, rk * h, err};
}

}  // namespace

QuadResult integrate(const std::function<double(double)>& f, double a, double b, double abs_tol,
                     double rel_tol, std::span<const double> breaks, int max_intervals) {
  QuadResult out;
  if (a == b) return out;
  double sign = 1.0;
  if (b < a) {
    std::swap(a, b);
    sign = -1.0;
  }
  std::vector<double> pts{a};
  for (double p : breaks)
    if (p > a && p < b) pts.push_back(p);
  pts.push_back(b);
  std::sort(pts.begin(), pts.end());
  std::priority_queue<Piece> heap;
  double total = 0, err = 0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    if (pts[i + 1] <= pts[i]) continue;
    Piece p = gk15(f, pts[i], pts[i + 1], out.evaluations);
    total += p.value;
    err += p.error;
    heap.push(p);
  }
  int n = static_cast<int>(heap.size());
  while (err > std::max(abs_tol, rel_tol * std::abs(total)) && n < max_intervals) {
    Piece p = heap.top();
    heap.pop();
    double m = 0.5 * (p.a + p.b);
    if (!(m > p.a && m < p.b)) {
      heap.push(p);
      break;
    }
    Piece l = gk15(f, p.a, m, out.evaluations), r = gk15(f, m, p.b, out.evaluations);
    total += l.value + r.value - p.value;
    err += l.error + r.error - p.error;
    heap.push(l);
    heap.push(r);
    ++n;
  }
  // recompute sums to shed accumulated rounding from the incremental updates
  total = 0;
  err = 0;
  while (!heap.empty()) {
    total += heap.top().value;
    err += heap.top().error;
    heap.pop();
  }
  if (!std::isfinite(total)) fail(ErrorKind::Accuracy, "non-finite integrand");
  out.value = sign * total;
  out.error = err;
  return out;
}

const HermiteRule& gauss_hermite(int order) {
  require(order >= 1 && order <= 2000, ErrorKind::Domain, "Gauss-Hermite order out of range");
  static std::mutex mu;
  static std::map<int, std::unique_ptr<HermiteRule>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(order);
  if (it != cache.end()) return *it->second;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(order, order);
  for (int k = 1; k < order; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  auto rule = std::make_unique<HermiteRule>();
  rule->nodes.resize(order);
  rule->weights.resize(order);
  for (int i = 0; i < order; ++i) {
    rule->nodes[i] = es.eigenvalues()(i);
    double v = es.eigenvectors()(0, i);
    rule->weights[i] = v * v;
  }
  for (int i = 0; i < order / 2; ++i) {
    double x = 0.5 * (rule->nodes[order - 1 - i] - rule->nodes[i]);
    double w = 0.5 * (rule->weights[order - 1 - i] + rule->weights[i]);
    rule->nodes[i] = -x;
    rule->nodes[order - 1 - i] = x;
    rule->weights[i] = rule->weights[order - 1 - i] = w;
  }
  if (order % 2 == 1) rule->nodes[order / 2] = 0.0;
  auto& ref = *rule;
  cache.emplace(order, std::move(rule));
  return ref;
}

}  // namespace semilab
