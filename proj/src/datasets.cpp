#include "symlab/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "symlab/errors.hpp"

namespace symlab {
namespace datasets {

Tensor apply_transform(const Tensor& img, Transform t) {
  if (img.rank() != 3)
    throw std::invalid_argument("apply_transform: expected H x W x C tensor");
  const std::int64_t h = img.extent(0), w = img.extent(1), c = img.extent(2);
  const bool swaps = (t == Transform::Rot90 || t == Transform::Rot270);
  Tensor out(swaps ? std::vector<std::int64_t>{w, h, c}
                   : std::vector<std::int64_t>{h, w, c});
  const std::int64_t oh = out.extent(0), ow = out.extent(1);
  for (std::int64_t i = 0; i < oh; ++i)
    for (std::int64_t j = 0; j < ow; ++j)
      for (std::int64_t ch = 0; ch < c; ++ch) {
        std::int64_t si = i, sj = j;
        switch (t) {
          case Transform::Identity: break;
          case Transform::Rot90:  si = h - 1 - j; sj = i; break;      // clockwise
          case Transform::Rot180: si = h - 1 - i; sj = w - 1 - j; break;
          case Transform::Rot270: si = j; sj = w - 1 - i; break;
          case Transform::HFlip:  sj = w - 1 - j; break;              // left-right
          case Transform::VFlip:  si = h - 1 - i; break;              // top-bottom
        }
        out.at3(i, j, ch) = img.at3(si, sj, ch);
      }
  return out;
}

namespace {

// Distinct-valued probe; two transforms are equal iff they act identically on it.
Tensor probe() {
  Tensor p({4, 4, 1});
  for (std::int64_t i = 0; i < 16; ++i) p[i] = static_cast<double>(i + 1);
  return p;
}

bool tensors_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && a.raw() == b.raw();
}

const std::vector<Transform>& all_transforms() {
  static const std::vector<Transform> all = {
      Transform::Identity, Transform::Rot90, Transform::Rot180,
      Transform::Rot270,   Transform::HFlip, Transform::VFlip};
  return all;
}

}  // namespace

Transform compose(Transform a, Transform b) {
  const Tensor composed = apply_transform(apply_transform(probe(), b), a);
  for (Transform t : all_transforms())
    if (tensors_equal(apply_transform(probe(), t), composed)) return t;
  throw std::invalid_argument(
      "compose: composition is not in the supported transform set");
}

TransformGroup::TransformGroup(std::vector<Transform> elements)
    : elements_(std::move(elements)) {
  if (std::find(elements_.begin(), elements_.end(), Transform::Identity) ==
      elements_.end())
    throw std::invalid_argument("TransformGroup: must contain the identity");
  for (Transform a : elements_)
    for (Transform b : elements_) {
      const Transform c = compose(a, b);
      if (std::find(elements_.begin(), elements_.end(), c) == elements_.end())
        throw std::invalid_argument("TransformGroup: not closed under composition");
    }
}

TransformGroup TransformGroup::identity_only() {
  return TransformGroup({Transform::Identity});
}
TransformGroup TransformGroup::flips_and_rot180() {
  return TransformGroup({Transform::Identity, Transform::Rot180,
                         Transform::HFlip, Transform::VFlip});
}
TransformGroup TransformGroup::rotations() {
  return TransformGroup({Transform::Identity, Transform::Rot90,
                         Transform::Rot180, Transform::Rot270});
}

InvarianceReport verify_group_invariance(const LabeledImageSet& set,
                                         const TransformGroup& group) {
  const bool has_rotation =
      std::any_of(group.elements().begin(), group.elements().end(), [](Transform t) {
        return t == Transform::Rot90 || t == Transform::Rot270;
      });
  for (const auto& img : set.images)
    if (has_rotation && img.extent(0) != img.extent(1))
      throw std::invalid_argument(
          "verify_group_invariance: rotations require square images");

  InvarianceReport report;
  for (std::size_t i = 0; i < set.images.size(); ++i) {
    for (Transform t : group.elements()) {
      const Tensor transformed = apply_transform(set.images[i], t);
      bool found = false;
      for (std::size_t j = 0; j < set.images.size(); ++j) {
        if (!tensors_equal(transformed, set.images[j])) continue;
        found = true;
        if (set.labels[j] != set.labels[i]) {
          report.invariant = false;
          report.violations.push_back({i, t, false, set.labels[j]});
        }
        break;
      }
      if (!found) {
        report.invariant = false;
        report.violations.push_back({i, t, true, -1});
      }
    }
  }
  return report;
}

std::vector<std::pair<double, int>> gen_scalar_dataset(int grid_size) {
  if (grid_size < 2)
    throw std::invalid_argument("gen_scalar_dataset: grid_size must be >= 2");
  std::vector<std::pair<double, int>> out;
  out.reserve(static_cast<std::size_t>(grid_size));
  for (int k = 0; k < grid_size; ++k) {
    const double x = (k + 0.5) / grid_size;
    out.emplace_back(x, x < 0.5 ? 0 : 1);
  }
  return out;
}

const char* k2x2DatasetVersion = "2x2-adjacent-pair-v1";

LabeledImageSet gen_2x2_dataset() {
  // Label rule: 1 iff an adjacent (horizontal or vertical) pixel pair is equal
  // and nonzero. The set is a union of orbits of {id, rot180, hflip, vflip};
  // the row-pair images escape the set under rot90, which maps rows to columns.
  auto img = [](double a, double b, double c, double d) {
    return Tensor({2, 2, 1}, {a, b, c, d});
  };
  LabeledImageSet set;
  set.name = k2x2DatasetVersion;
  auto add = [&](Tensor t, int label) {
    set.images.push_back(std::move(t));
    set.labels.push_back(label);
  };
  // single-corner orbit, label 0
  add(img(1, 0, 0, 0), 0);
  add(img(0, 1, 0, 0), 0);
  add(img(0, 0, 1, 0), 0);
  add(img(0, 0, 0, 1), 0);
  // +1 row pair orbit, label 1
  add(img(1, 1, 0, 0), 1);
  add(img(0, 0, 1, 1), 1);
  // mixed-sign row orbit, label 0
  add(img(1, -1, 0, 0), 0);
  add(img(-1, 1, 0, 0), 0);
  add(img(0, 0, 1, -1), 0);
  add(img(0, 0, -1, 1), 0);
  // -1 row pair orbit, label 1
  add(img(-1, -1, 0, 0), 1);
  add(img(0, 0, -1, -1), 1);
  return set;
}

LabeledImageSet gen_bars_dataset(int n, Prng& prng) {
  if (n < 2) throw std::invalid_argument("gen_bars_dataset: n must be >= 2");
  LabeledImageSet set;
  set.name = "bars8x8";
  for (int s = 0; s < n; ++s) {
    const int label = s % 2;
    const int bar_row = static_cast<int>(prng.below(4)) + (label == 0 ? 0 : 4);
    Tensor img({8, 8, 1});
    for (std::int64_t i = 0; i < 8; ++i)
      for (std::int64_t j = 0; j < 8; ++j)
        img.at3(i, j, 0) = (i == bar_row ? 1.0 : 0.0) + prng.normal(0.0, 0.05);
    set.images.push_back(std::move(img));
    set.labels.push_back(label);
  }
  return set;
}

LabeledImageSet load_cifar10(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("load_cifar10: cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  constexpr std::size_t kRecord = 3073;
  if (bytes.empty() || bytes.size() % kRecord != 0)
    throw FormatError("load_cifar10: file size " + std::to_string(bytes.size()) +
                      " is not a multiple of the 3073-byte record (offset " +
                      std::to_string(bytes.size() - bytes.size() % kRecord) + ")");
  LabeledImageSet set;
  set.name = "cifar10";
  set.num_classes = 10;
  const std::size_t count = bytes.size() / kRecord;
  for (std::size_t r = 0; r < count; ++r) {
    const unsigned char* rec = bytes.data() + r * kRecord;
    if (rec[0] > 9)
      throw FormatError("load_cifar10: label byte " + std::to_string(rec[0]) +
                        " > 9 at offset " + std::to_string(r * kRecord));
    Tensor img({32, 32, 3});
    for (std::int64_t ch = 0; ch < 3; ++ch)
      for (std::int64_t i = 0; i < 32; ++i)
        for (std::int64_t j = 0; j < 32; ++j)
          img.at3(i, j, ch) = rec[1 + ch * 1024 + i * 32 + j] / 255.0;
    set.images.push_back(std::move(img));
    set.labels.push_back(rec[0]);
  }
  return set;
}

LabeledImageSet subset(const LabeledImageSet& set, std::uint64_t seed, int count) {
  if (count < 0 || count > static_cast<int>(set.images.size()))
    throw std::invalid_argument("subset: count out of range");
  std::vector<std::size_t> idx(set.images.size());
  std::iota(idx.begin(), idx.end(), 0);
  Prng prng(seed);
  for (std::size_t i = idx.size() - 1; i > 0; --i)
    std::swap(idx[i], idx[prng.below(i + 1)]);
  LabeledImageSet out;
  out.name = set.name + "-subset";
  out.num_classes = set.num_classes;
  for (int i = 0; i < count; ++i) {
    out.images.push_back(set.images[idx[static_cast<std::size_t>(i)]]);
    out.labels.push_back(set.labels[idx[static_cast<std::size_t>(i)]]);
  }
  return out;
}

}  // namespace datasets
}  // namespace symlab
