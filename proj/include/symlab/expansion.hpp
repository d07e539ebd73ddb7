#pragma once

#include <optional>
#include <string>
#include <vector>

#include "symlab/prng.hpp"
#include "symlab/tensor.hpp"

namespace symlab {
namespace expansion {

struct FillSpec {
  enum class Kind { Constant, RandomNormal } kind = Kind::Constant;
  double value = 0.5;      // constant fill
  double mean = 0.5;       // random fill, clamped to [0, 1]
  double std = 0.25;

  static FillSpec constant(double v) { return {Kind::Constant, v, 0.0, 0.0}; }
  static FillSpec random_normal(double mean = 0.5, double std = 0.25) {
    return {Kind::RandomNormal, 0.0, mean, std};
  }
};

struct ExpansionConfig {
  int factor = 2;  // K >= 1
  FillSpec fill;
  std::optional<int> first_kernel_size;
};

// H x W x C -> HK x WK x C. Original pixel (i, j) lands at (i*K, j*K); every
// other position takes the fill value.
Tensor expand_image(const Tensor& img, const ExpansionConfig& cfg, Prng& prng);

// Inverse gather at stride-K anchor positions.
Tensor gather_original(const Tensor& expanded, int original_h, int original_w, int K);

// One pattern token: a value taken from either the input vector or the
// constants vector.
struct PatternToken {
  enum class Source { Input, Constant } source;
  int index;
};
using Pattern = std::vector<PatternToken>;

std::vector<double> expand_vector(const std::vector<double>& v,
                                  const std::vector<double>& constants,
                                  const Pattern& pattern);

// [x, t] with constants [x_c, t_c] -> [x, x_c, x, x_c, x, t, t_c, t, t_c, t].
Pattern pinn_pattern_2d();
// v followed by all constants.
Pattern append_pattern(int v_len, int const_len);
// v unchanged.
Pattern identity_pattern(int v_len);

// [a, b] -> [a, 0, b, 0].
std::vector<double> interleave_zeros(const std::vector<double>& v);

enum class FactorValidity { Ok, Warning };

// Warns when the expansion factor exceeds the first conv kernel, where the
// kernel would see only fill values.
FactorValidity validate_factor(const ExpansionConfig& cfg);

}  // namespace expansion
}  // namespace symlab
