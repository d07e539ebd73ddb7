#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "symlab/prng.hpp"
#include "symlab/tensor.hpp"

namespace symlab {
namespace datasets {

struct LabeledImageSet {
  std::vector<Tensor> images;  // each H x W x C
  std::vector<int> labels;
  std::string name;
  int num_classes = 2;
};

enum class Transform { Identity, Rot90, Rot180, Rot270, HFlip, VFlip };

Tensor apply_transform(const Tensor& img, Transform t);
Transform compose(Transform a, Transform b);

// Subset of {identity, rot90, rot180, rot270, hflip, vflip}; must contain the
// identity and be closed under composition.
class TransformGroup {
public:
  explicit TransformGroup(std::vector<Transform> elements);
  const std::vector<Transform>& elements() const { return elements_; }

  static TransformGroup identity_only();
  static TransformGroup flips_and_rot180();  // {id, rot180, hflip, vflip}
  static TransformGroup rotations();         // {id, rot90, rot180, rot270}

private:
  std::vector<Transform> elements_;
};

struct InvarianceViolation {
  std::size_t image_index;
  Transform transform;
  bool missing;         // transformed image absent from the set
  int found_label = -1; // label found when present with different label
};

struct InvarianceReport {
  bool invariant = true;
  std::vector<InvarianceViolation> violations;
};

// Exhaustive: every image under every group element must appear in the set
// (pixel-exact) with the same label.
InvarianceReport verify_group_invariance(const LabeledImageSet& set,
                                         const TransformGroup& group);

// Uniform grid (k + 0.5)/M, label 0 below 0.5 and 1 above.
std::vector<std::pair<double, int>> gen_scalar_dataset(int grid_size);

// The fixed 12-image 2x2 set: pixels in {-1, 0, 1}, closed under
// {id, rot180, hflip, vflip} with labels preserved, not closed under rot90.
// Label rule: 1 iff the image contains an adjacent equal nonzero pixel pair.
LabeledImageSet gen_2x2_dataset();

extern const char* k2x2DatasetVersion;

// 8x8 grayscale bars: class 0 = bar in the top half, class 1 = bottom half.
// Labels are hflip-invariant and rot180-reversed by construction.
LabeledImageSet gen_bars_dataset(int n, Prng& prng);

// CIFAR-10 binary batch: per record 1 label byte + 3072 pixel bytes.
LabeledImageSet load_cifar10(const std::string& path);

// Deterministic subset selection.
LabeledImageSet subset(const LabeledImageSet& set, std::uint64_t seed, int count);

}  // namespace datasets
}  // namespace symlab
