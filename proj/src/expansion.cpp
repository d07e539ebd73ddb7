#include "symlab/expansion.hpp"

#include <algorithm>
#include <stdexcept>

namespace symlab {
namespace expansion {

Tensor expand_image(const Tensor& img, const ExpansionConfig& cfg, Prng& prng) {
  if (img.rank() != 3)
    throw std::invalid_argument("expand_image: expected H x W x C tensor, got " +
                                shape_string(img.shape()));
  if (cfg.factor < 1)
    throw std::invalid_argument("expand_image: factor must be >= 1");
  const std::int64_t h = img.extent(0), w = img.extent(1), c = img.extent(2);
  const int K = cfg.factor;

  Tensor out({h * K, w * K, c});
  for (std::int64_t i = 0; i < h * K; ++i)
    for (std::int64_t j = 0; j < w * K; ++j)
      for (std::int64_t ch = 0; ch < c; ++ch) {
        if (i % K == 0 && j % K == 0) {
          out.at3(i, j, ch) = img.at3(i / K, j / K, ch);
        } else if (cfg.fill.kind == FillSpec::Kind::Constant) {
          out.at3(i, j, ch) = cfg.fill.value;
        } else {
          out.at3(i, j, ch) =
              std::clamp(prng.normal(cfg.fill.mean, cfg.fill.std), 0.0, 1.0);
        }
      }
  return out;
}

Tensor gather_original(const Tensor& expanded, int original_h, int original_w, int K) {
  if (expanded.rank() != 3)
    throw std::invalid_argument("gather_original: expected H x W x C tensor");
  if (expanded.extent(0) != static_cast<std::int64_t>(original_h) * K ||
      expanded.extent(1) != static_cast<std::int64_t>(original_w) * K)
    throw std::invalid_argument("gather_original: shape inconsistent with K");
  const std::int64_t c = expanded.extent(2);
  Tensor out({original_h, original_w, c});
  for (std::int64_t i = 0; i < original_h; ++i)
    for (std::int64_t j = 0; j < original_w; ++j)
      for (std::int64_t ch = 0; ch < c; ++ch)
        out.at3(i, j, ch) = expanded.at3(i * K, j * K, ch);
  return out;
}

std::vector<double> expand_vector(const std::vector<double>& v,
                                  const std::vector<double>& constants,
                                  const Pattern& pattern) {
  std::vector<double> out;
  out.reserve(pattern.size());
  for (const auto& tok : pattern) {
    if (tok.source == PatternToken::Source::Input) {
      if (tok.index < 0 || tok.index >= static_cast<int>(v.size()))
        throw std::invalid_argument("expand_vector: input index out of range");
      out.push_back(v[static_cast<std::size_t>(tok.index)]);
    } else {
      if (tok.index < 0 || tok.index >= static_cast<int>(constants.size()))
        throw std::invalid_argument("expand_vector: constant index out of range");
      out.push_back(constants[static_cast<std::size_t>(tok.index)]);
    }
  }
  return out;
}

Pattern pinn_pattern_2d() {
  using S = PatternToken::Source;
  return {{S::Input, 0}, {S::Constant, 0}, {S::Input, 0}, {S::Constant, 0},
          {S::Input, 0}, {S::Input, 1},    {S::Constant, 1}, {S::Input, 1},
          {S::Constant, 1}, {S::Input, 1}};
}

Pattern append_pattern(int v_len, int const_len) {
  Pattern p;
  for (int i = 0; i < v_len; ++i) p.push_back({PatternToken::Source::Input, i});
  for (int i = 0; i < const_len; ++i) p.push_back({PatternToken::Source::Constant, i});
  return p;
}

Pattern identity_pattern(int v_len) {
  Pattern p;
  for (int i = 0; i < v_len; ++i) p.push_back({PatternToken::Source::Input, i});
  return p;
}

std::vector<double> interleave_zeros(const std::vector<double>& v) {
  std::vector<double> out(2 * v.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) out[2 * i] = v[i];
  return out;
}

FactorValidity validate_factor(const ExpansionConfig& cfg) {
  if (!cfg.first_kernel_size)
    throw std::invalid_argument("validate_factor: first_kernel_size not provided");
  return cfg.factor > *cfg.first_kernel_size ? FactorValidity::Warning
                                             : FactorValidity::Ok;
}

}  // namespace expansion
}  // namespace symlab
