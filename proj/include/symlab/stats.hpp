#pragma once

#include <vector>

#include <Eigen/Dense>

namespace symlab {

// Gaussian-smoothed, unit-integral histogram (trapezoidal normalization).
struct DensityCurve {
  std::vector<double> bin_centers;
  std::vector<double> density;
  double sigma_bins = 0.0;
};

struct DensitySummary {
  double mean = 0.0;  // arithmetic mean of the raw values
  double peak = 0.0;  // bin center of the density maximum (ties: smallest center)
};

// Mean absolute difference of sorted equal-length samples.
double wasserstein_1d(const std::vector<double>& a, const std::vector<double>& b);

// Projections of mean-centered rows onto the top principal components,
// ordered by descending explained variance. Output is R x min(d, R, D).
// Component signs are fixed by forcing each component's largest-magnitude
// loading positive.
Eigen::MatrixXd pca_reduce(const Eigen::MatrixXd& rows, int d);

DensityCurve smoothed_histogram(const std::vector<double>& values, int bins,
                                double sigma_bins);

DensitySummary density_summary(const DensityCurve& curve,
                               const std::vector<double>& raw_values);

}  // namespace symlab
