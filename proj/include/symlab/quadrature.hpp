#pragma once

#include <functional>
#include <vector>

namespace symlab {

// Gauss-Legendre rule on [-1, 1].
struct QuadratureRule {
  int n = 0;
  std::vector<double> nodes;    // ascending, antisymmetric: nodes[i] = -nodes[n-1-i]
  std::vector<double> weights;  // positive, sum = 2
};

// n in [1, 256].
QuadratureRule gauss_legendre(int n);

// Integral of f over [0, inf) via the rational map p = scale*(1+u)/(1-u).
// Throws NumericalError if f returns a non-finite value at any node.
double integrate_semi_infinite(const std::function<double(double)>& f,
                               const QuadratureRule& rule, double scale);

}  // namespace symlab
