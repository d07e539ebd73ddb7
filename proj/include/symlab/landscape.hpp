#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "symlab/datasets.hpp"
#include "symlab/prng.hpp"

namespace symlab {
namespace landscape {

// One point of the enumerated weight space: bit k of `index` decodes to
// weight k in {-1, +1} (bit 1 -> +1), in layer-major, row-major
// (output-major) order; enumerated biases are appended after all weights.
struct SignAssignment {
  std::uint64_t index = 0;
  int bit_count = 0;
  double weight(int k) const { return ((index >> k) & 1u) ? 1.0 : -1.0; }
};

enum class ScalarVariant { Raw, Expanded };
enum class ConvVariant { Baseline, Dropout, Batchnorm, Equivariant, WrongEquivariant };

// Layer sizes 1 -> 3 -> 3 -> 2 -> 1 (expanded: 2 -> ... with input [x, 0.5]),
// tanh after each hidden layer, linear output, MSE against the 0/1 label.
struct ScalarNetSpec {
  ScalarVariant variant = ScalarVariant::Raw;
  bool first_layer_bias = false;
  int bit_count() const;
  std::vector<int> layer_sizes() const;  // [in, 3, 3, 2, 1]
};

// conv = F filters of 2x2 (valid) -> variant stage -> dense F->H, tanh ->
// dense H->2 logits, cross-entropy.
struct ConvNet2x2Spec {
  ConvVariant variant = ConvVariant::Baseline;
  int filters = 2;
  int hidden = 2;
  std::uint64_t seed = 0;        // dropout masks
  int dropout_masks = 8;
  double dropout_rate = 0.3;
  int bit_count() const;
};

constexpr int kMaxEnumerationBits = 26;

struct LossGroup {
  double loss;                  // group representative (largest member)
  std::int64_t multiplicity;
};

struct LossLandscape {
  std::vector<double> losses;   // descending
  std::vector<LossGroup> groups;  // grouped at `tol`, descending
  double tol = 1e-9;
  std::uint64_t config_count = 0;
  std::string spec_id;
  std::string dataset_id;
  std::uint64_t seed = 0;
};

struct DegeneracyProfile {
  std::int64_t distinct_levels = 0;
  std::int64_t max_multiplicity = 0;
  double plateau_fraction = 0.0;
};

struct LandscapeComparison {
  double min_loss_a, min_loss_b;
  std::int64_t distinct_a, distinct_b;
  double plateau_a, plateau_b;
};

// --- scalar net ---

double scalar_net_forward(const SignAssignment& assignment, double x,
                          const ScalarNetSpec& spec);

// MSE over the dataset for one assignment.
double scalar_net_loss(std::uint64_t index, const ScalarNetSpec& spec,
                       const std::vector<std::pair<double, int>>& data);

LossLandscape enumerate_scalar(const ScalarNetSpec& spec,
                               const std::vector<std::pair<double, int>>& data,
                               double tol = 1e-9, int workers = 1);

// Bit-string symmetries (test oracles). Hidden layers are numbered 1..3.
std::uint64_t swap_hidden_units(std::uint64_t index, const ScalarNetSpec& spec,
                                int hidden_layer, int unit_a, int unit_b);
std::uint64_t flip_unit_signs(std::uint64_t index, const ScalarNetSpec& spec,
                              int hidden_layer, int unit);

// --- 2x2 convnet ---

std::vector<double> convnet2x2_forward(const SignAssignment& assignment,
                                       const Tensor& image,
                                       const ConvNet2x2Spec& spec,
                                       const datasets::LabeledImageSet& batch_context);

double convnet2x2_loss(std::uint64_t index, const ConvNet2x2Spec& spec,
                       const datasets::LabeledImageSet& data);

// Mean of baseline logits over the orbit {g * image : g in group}.
std::vector<double> orbit_average_forward(const SignAssignment& assignment,
                                          const Tensor& image,
                                          const ConvNet2x2Spec& spec,
                                          const datasets::TransformGroup& group);

// True when the joint filter bit block is the lexicographically smallest
// among its simultaneous group transforms (always true for non-equivariant
// variants). Equivariant enumeration visits only canonical assignments.
bool is_canonical(std::uint64_t index, const ConvNet2x2Spec& spec);

LossLandscape enumerate_convnet(const ConvNet2x2Spec& spec,
                                const datasets::LabeledImageSet& data,
                                double tol = 1e-9, int workers = 1);

// --- analysis ---

DegeneracyProfile degeneracy_profile(const LossLandscape& landscape);

LandscapeComparison compare_landscapes(const LossLandscape& a, const LossLandscape& b);

// Group index of a loss value within the landscape's grouped levels.
std::int64_t group_of(const LossLandscape& landscape, double loss);

}  // namespace landscape
}  // namespace symlab
