#include "symlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace symlab {

double wasserstein_1d(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("wasserstein_1d: empty sample");
  if (a.size() != b.size())
    throw std::invalid_argument("wasserstein_1d: unequal sample lengths (" +
                                std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  std::vector<double> sa = a, sb = b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) sum += std::abs(sa[i] - sb[i]);
  return sum / static_cast<double>(sa.size());
}

Eigen::MatrixXd pca_reduce(const Eigen::MatrixXd& rows, int d) {
  const Eigen::Index R = rows.rows();
  const Eigen::Index D = rows.cols();
  if (R < 2) throw std::invalid_argument("pca_reduce: need at least 2 rows");
  if (D < 1 || d < 1) throw std::invalid_argument("pca_reduce: need D >= 1 and d >= 1");

  Eigen::MatrixXd centered = rows.rowwise() - rows.colwise().mean();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::Index k = std::min<Eigen::Index>(d, std::min(R, D));

  Eigen::MatrixXd components = svd.matrixV().leftCols(k);
  // Sign convention: largest-magnitude loading of each component is positive.
  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::Index imax = 0;
    components.col(c).cwiseAbs().maxCoeff(&imax);
    if (components(imax, c) < 0.0) components.col(c) = -components.col(c);
  }
  return centered * components;
}

DensityCurve smoothed_histogram(const std::vector<double>& values, int bins,
                                double sigma_bins) {
  if (values.empty()) throw std::invalid_argument("smoothed_histogram: empty values");
  if (bins < 2) throw std::invalid_argument("smoothed_histogram: bins must be >= 2");

  double lo = *std::min_element(values.begin(), values.end());
  double hi = *std::max_element(values.begin(), values.end());
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double width = (hi - lo) / bins;

  std::vector<double> counts(bins, 0.0);
  for (double v : values) {
    int b = static_cast<int>((v - lo) / width);
    b = std::clamp(b, 0, bins - 1);
    counts[b] += 1.0;
  }

  DensityCurve curve;
  curve.sigma_bins = sigma_bins;
  curve.bin_centers.resize(bins);
  for (int i = 0; i < bins; ++i) curve.bin_centers[i] = lo + (i + 0.5) * width;

  // Truncated discrete Gaussian, renormalized per output bin so mass is
  // conserved at the edges; degenerate sigma falls back to the raw histogram.
  std::vector<double> smoothed(bins, 0.0);
  const int radius = std::max(0, static_cast<int>(std::ceil(4.0 * sigma_bins)));
  if (sigma_bins <= 1e-12 || radius == 0) {
    smoothed = counts;
  } else {
    std::vector<double> kernel(2 * radius + 1);
    for (int k = -radius; k <= radius; ++k)
      kernel[k + radius] = std::exp(-0.5 * (k / sigma_bins) * (k / sigma_bins));
    for (int i = 0; i < bins; ++i) {
      double acc = 0.0, ksum = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const int j = i + k;
        if (j < 0 || j >= bins) continue;
        acc += kernel[k + radius] * counts[j];
        ksum += kernel[k + radius];
      }
      smoothed[i] = acc / ksum;
    }
  }

  // Normalize to unit trapezoidal integral over the bin centers.
  double integral = 0.0;
  for (int i = 0; i + 1 < bins; ++i)
    integral += 0.5 * (smoothed[i] + smoothed[i + 1]) * width;
  if (integral <= 0.0) integral = 1.0;
  curve.density.resize(bins);
  for (int i = 0; i < bins; ++i) curve.density[i] = smoothed[i] / integral;
  return curve;
}

DensitySummary density_summary(const DensityCurve& curve,
                               const std::vector<double>& raw_values) {
  if (raw_values.empty())
    throw std::invalid_argument("density_summary: empty raw values");
  DensitySummary out;
  double sum = 0.0;
  for (double v : raw_values) sum += v;
  out.mean = sum / static_cast<double>(raw_values.size());

  double best = -1.0;
  for (std::size_t i = 0; i < curve.density.size(); ++i) {
    if (curve.density[i] > best) {
      best = curve.density[i];
      out.peak = curve.bin_centers[i];
    }
  }
  return out;
}

}  // namespace symlab
