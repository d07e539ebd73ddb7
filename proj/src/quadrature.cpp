#include "symlab/quadrature.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "symlab/errors.hpp"

namespace symlab {

QuadratureRule gauss_legendre(int n) {
  if (n < 1 || n > 256)
    throw std::invalid_argument("gauss_legendre: n must be in [1, 256], got " +
                                std::to_string(n));
  QuadratureRule rule;
  rule.n = n;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);

  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Chebyshev estimate of the i-th root, refined by Newton on P_n.
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    // Mirror so node antisymmetry holds exactly.
    rule.nodes[i] = -x;
    rule.weights[i] = w;
    rule.nodes[n - 1 - i] = x;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

double integrate_semi_infinite(const std::function<double(double)>& f,
                               const QuadratureRule& rule, double scale) {
  if (scale <= 0.0)
    throw std::invalid_argument("integrate_semi_infinite: scale must be > 0");
  double sum = 0.0;
  for (int i = 0; i < rule.n; ++i) {
    const double u = rule.nodes[i];
    const double p = scale * (1.0 + u) / (1.0 - u);
    const double jac = 2.0 * scale / ((1.0 - u) * (1.0 - u));
    const double fv = f(p);
    if (!std::isfinite(fv))
      throw NumericalError("integrate_semi_infinite: non-finite integrand at p = " +
                           std::to_string(p));
    sum += rule.weights[i] * fv * jac;
  }
  return sum;
}

}  // namespace symlab
