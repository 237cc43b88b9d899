#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "dipolestack/core.hpp"

namespace dipolestack::quad {

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline GaussRule gauss_legendre(int order) {
  GaussRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  for (int i = 0; i < (order + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (order + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= order; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = order * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    rule.nodes[i] = -x;
    rule.nodes[order - 1 - i] = x;
    rule.weights[i] = rule.weights[order - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

/// Composite Gauss-Legendre over `panels` equal sub-intervals of [a, b].
template <class F>
double composite_gauss(F&& f, double a, double b, int panels, const GaussRule& rule) {
  const double h = (b - a) / panels;
  double sum = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      sum += rule.weights[i] * f(mid + 0.5 * h * rule.nodes[i]);
    }
  }
  return 0.5 * h * sum;
}

/// Sample point recorded by adaptive integration.
struct Sample {
  double x;
  double y;
};

/// Adaptive Simpson on one panel. Records every evaluated point in `samples`
/// (unsorted) and reports, in `unresolved`, leaves that hit the depth limit
/// with an error above the panel's tolerance.
class AdaptiveSimpson {
 public:
  AdaptiveSimpson(std::function<double(double)> f, double abs_tol, int max_depth)
      : f_(std::move(f)), abs_tol_(abs_tol), max_depth_(max_depth) {}

  double integrate(double a, double b) {
    const double fa = eval(a), fb = eval(b), fm = eval(0.5 * (a + b));
    return recurse(a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), abs_tol_, 0);
  }

  void set_tolerance(double abs_tol) { abs_tol_ = abs_tol; }
  std::vector<Sample>& samples() { return samples_; }
  const std::vector<double>& unresolved() const { return unresolved_; }

 private:
  static double simpson(double a, double b, double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  }

  double eval(double x) {
    const double y = f_(x);
    samples_.push_back({x, y});
    return y;
  }

  double recurse(double a, double b, double fa, double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = eval(lm), frm = eval(rm);
    const double left = simpson(a, m, fa, flm, fm);
    const double right = simpson(m, b, fm, frm, fb);
    const double delta = left + right - whole;
    if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    if (depth >= max_depth_) {
      // Leaves whose residual error is within the whole budget are not reported.
      if (std::abs(delta) > 15.0 * abs_tol_) unresolved_.push_back(m);
      return left + right + delta / 15.0;
    }
    return recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
           recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
  }

  std::function<double(double)> f_;
  double abs_tol_;
  int max_depth_;
  std::vector<Sample> samples_;
  std::vector<double> unresolved_;
};

}  // namespace dipolestack::quad
