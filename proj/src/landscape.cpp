#include "symlab/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

#include <Eigen/Dense>

namespace symlab {
namespace landscape {

namespace {

constexpr int kHidden[3] = {3, 3, 2};

std::string scalar_spec_id(const ScalarNetSpec& s) {
  std::string id = s.variant == ScalarVariant::Raw ? "scalar_raw" : "scalar_expanded";
  if (s.first_layer_bias) id += "_bias";
  return id;
}

std::string conv_spec_id(const ConvNet2x2Spec& s) {
  switch (s.variant) {
    case ConvVariant::Baseline: return "convnet2x2_baseline";
    case ConvVariant::Dropout: return "convnet2x2_dropout";
    case ConvVariant::Batchnorm: return "convnet2x2_batchnorm";
    case ConvVariant::Equivariant: return "convnet2x2_equivariant";
    case ConvVariant::WrongEquivariant: return "convnet2x2_wrong_equivariant";
  }
  return "convnet2x2";
}

}  // namespace

std::vector<int> ScalarNetSpec::layer_sizes() const {
  return {variant == ScalarVariant::Raw ? 1 : 2, 3, 3, 2, 1};
}

int ScalarNetSpec::bit_count() const {
  const auto sizes = layer_sizes();
  int n = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += sizes[l] * sizes[l + 1];
  if (first_layer_bias) n += sizes[1];
  return n;
}

int ConvNet2x2Spec::bit_count() const {
  return 4 * filters + filters * hidden + hidden * 2;
}

namespace {

// Enumeration kernel for the scalar net; owns preallocated activations so the
// hot loop does not touch the allocator.
class ScalarKernel {
public:
  ScalarKernel(const ScalarNetSpec& spec,
               const std::vector<std::pair<double, int>>& data)
      : spec_(spec), in_(spec.variant == ScalarVariant::Raw ? 1 : 2) {
    const Eigen::Index m = static_cast<Eigen::Index>(data.size());
    x_.resize(in_, m);
    t_.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      x_(0, i) = data[static_cast<std::size_t>(i)].first;
      if (in_ == 2) x_(1, i) = 0.5;  // the constant expansion channel
      t_(i) = static_cast<double>(data[static_cast<std::size_t>(i)].second);
    }
    w1_.resize(3, in_);
    b1_.setZero(3);
    h1_.resize(3, m);
    h2_.resize(3, m);
    h3_.resize(2, m);
    y_.resize(m);
  }

  double loss(std::uint64_t index) {
    int k = 0;
    auto next = [&]() { return ((index >> k++) & 1u) ? 1.0 : -1.0; };
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < in_; ++c) w1_(r, c) = next();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) w2_(r, c) = next();
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 3; ++c) w3_(r, c) = next();
    for (int c = 0; c < 2; ++c) w4_(0, c) = next();
    if (spec_.first_layer_bias)
      for (int r = 0; r < 3; ++r) b1_(r) = next();

    h1_.noalias() = w1_ * x_;
    if (spec_.first_layer_bias) h1_.colwise() += b1_;
    h1_ = h1_.array().tanh();
    h2_.noalias() = w2_ * h1_;
    h2_ = h2_.array().tanh();
    h3_.noalias() = w3_ * h2_;
    h3_ = h3_.array().tanh();
    y_.noalias() = w4_ * h3_;
    return (y_ - t_.transpose()).squaredNorm() / static_cast<double>(t_.size());
  }

private:
  ScalarNetSpec spec_;
  int in_;
  Eigen::MatrixXd x_;
  Eigen::VectorXd t_;
  Eigen::MatrixXd w1_;
  Eigen::Matrix<double, 3, 3> w2_;
  Eigen::Matrix<double, 2, 3> w3_;
  Eigen::Matrix<double, 1, 2> w4_;
  Eigen::Vector3d b1_;
  Eigen::MatrixXd h1_, h2_, h3_;
  Eigen::RowVectorXd y_;
};

double cross_entropy_of_logits(const Eigen::MatrixXd& logits,
                               const std::vector<int>& labels) {
  double loss = 0.0;
  for (Eigen::Index i = 0; i < logits.cols(); ++i) {
    const double mx = logits.col(i).maxCoeff();
    double z = 0.0;
    for (Eigen::Index r = 0; r < logits.rows(); ++r)
      z += std::exp(logits(r, i) - mx);
    loss += std::log(z) + mx - logits(static_cast<Eigen::Index>(labels[i]), i);
  }
  return loss / static_cast<double>(logits.cols());
}

class ConvKernel {
public:
  ConvKernel(const ConvNet2x2Spec& spec, const datasets::LabeledImageSet& data)
      : spec_(spec), f_(spec.filters), h_(spec.hidden) {
    const Eigen::Index m = static_cast<Eigen::Index>(data.images.size());
    labels_ = data.labels;

    auto pixels = [](const Tensor& img) {
      Eigen::Vector4d p;
      for (int e = 0; e < 4; ++e) p(e) = img[e];
      return p;
    };
    p_.resize(4, m);
    for (Eigen::Index i = 0; i < m; ++i) p_.col(i) = pixels(data.images[static_cast<std::size_t>(i)]);

    if (spec.variant == ConvVariant::Equivariant ||
        spec.variant == ConvVariant::WrongEquivariant) {
      const auto group = spec.variant == ConvVariant::Equivariant
                             ? datasets::TransformGroup::flips_and_rot180()
                             : datasets::TransformGroup::rotations();
      for (auto t : group.elements()) {
        Eigen::MatrixXd pg(4, m);
        for (Eigen::Index i = 0; i < m; ++i)
          pg.col(i) = pixels(datasets::apply_transform(
              data.images[static_cast<std::size_t>(i)], t));
        orbit_.push_back(std::move(pg));
        // Entry permutation of a 2x2 filter under the same transform; used
        // for canonical-representative filtering.
        Tensor probe({2, 2, 1}, {0.0, 1.0, 2.0, 3.0});
        Tensor moved = datasets::apply_transform(probe, t);
        std::array<int, 4> perm{};
        for (int e = 0; e < 4; ++e) perm[static_cast<std::size_t>(e)] =
            static_cast<int>(moved[e]);
        perms_.push_back(perm);
      }
    }

    if (spec.variant == ConvVariant::Dropout) {
      Prng mask_stream = Prng(spec.seed).substream(Prng::hash_string("dropout_masks"));
      const double scale = 1.0 / (1.0 - spec.dropout_rate);
      for (int msk = 0; msk < spec.dropout_masks; ++msk) {
        Eigen::VectorXd mv(f_);
        for (int ff = 0; ff < f_; ++ff)
          mv(ff) = (mask_stream.uniform() < spec.dropout_rate) ? 0.0 : scale;
        masks_.push_back(std::move(mv));
      }
    }

    wf_.resize(f_, 4);
    d1_.resize(h_, f_);
    d2_.resize(2, h_);
    hc_.resize(f_, m);
    z1_.resize(h_, m);
    logits_.resize(2, m);
  }

  void decode(std::uint64_t index) {
    int k = 0;
    auto next = [&]() { return ((index >> k++) & 1u) ? 1.0 : -1.0; };
    for (int ff = 0; ff < f_; ++ff)
      for (int e = 0; e < 4; ++e) wf_(ff, e) = next();
    for (int r = 0; r < h_; ++r)
      for (int c = 0; c < f_; ++c) d1_(r, c) = next();
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < h_; ++c) d2_(r, c) = next();
  }

  double loss(std::uint64_t index) {
    decode(index);
    switch (spec_.variant) {
      case ConvVariant::Baseline: {
        forward_from(p_);
        return cross_entropy_of_logits(logits_, labels_);
      }
      case ConvVariant::Batchnorm: {
        hc_.noalias() = wf_ * p_;
        // Batch statistics over the whole set; gamma = 1, beta = 0.
        for (int ff = 0; ff < f_; ++ff) {
          const double mean = hc_.row(ff).mean();
          const double var = (hc_.row(ff).array() - mean).square().mean();
          hc_.row(ff) = (hc_.row(ff).array() - mean) / std::sqrt(var + 1e-5);
        }
        finish_from_conv();
        return cross_entropy_of_logits(logits_, labels_);
      }
      case ConvVariant::Dropout: {
        hc_.noalias() = wf_ * p_;
        const Eigen::MatrixXd conv = hc_;
        double total = 0.0;
        for (const auto& mask : masks_) {
          hc_ = conv.array().colwise() * mask.array();
          finish_from_conv();
          total += cross_entropy_of_logits(logits_, labels_);
        }
        return total / static_cast<double>(masks_.size());
      }
      case ConvVariant::Equivariant:
      case ConvVariant::WrongEquivariant: {
        Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(2, p_.cols());
        for (const auto& pg : orbit_) {
          forward_from(pg);
          avg += logits_;
        }
        logits_ = avg / static_cast<double>(orbit_.size());
        return cross_entropy_of_logits(logits_, labels_);
      }
    }
    return 0.0;
  }

  bool canonical(std::uint64_t index) const {
    if (perms_.empty()) return true;
    const int fbits_n = 4 * f_;
    const std::uint64_t fmask = (1ull << fbits_n) - 1;
    const std::uint64_t fbits = index & fmask;
    for (const auto& perm : perms_) {
      std::uint64_t tb = 0;
      for (int ff = 0; ff < f_; ++ff)
        for (int e = 0; e < 4; ++e) {
          const int src = ff * 4 + perm[static_cast<std::size_t>(e)];
          if ((fbits >> src) & 1u) tb |= 1ull << (ff * 4 + e);
        }
      if (tb < fbits) return false;
    }
    return true;
  }

  const Eigen::MatrixXd& last_logits() const { return logits_; }

private:
  void forward_from(const Eigen::MatrixXd& pixels) {
    hc_.noalias() = wf_ * pixels;
    finish_from_conv();
  }
  void finish_from_conv() {
    z1_.noalias() = d1_ * hc_;
    z1_ = z1_.array().tanh();
    logits_.noalias() = d2_ * z1_;
  }

  ConvNet2x2Spec spec_;
  int f_, h_;
  std::vector<int> labels_;
  Eigen::MatrixXd p_;
  std::vector<Eigen::MatrixXd> orbit_;
  std::vector<std::array<int, 4>> perms_;
  std::vector<Eigen::VectorXd> masks_;
  Eigen::MatrixXd wf_, d1_, d2_, hc_, z1_, logits_;
};

std::vector<LossGroup> group_losses(const std::vector<double>& sorted_desc,
                                    double tol) {
  std::vector<LossGroup> groups;
  for (double v : sorted_desc) {
    if (groups.empty() || groups.back().loss - v > tol)
      groups.push_back({v, 1});
    else
      ++groups.back().multiplicity;
  }
  return groups;
}

template <typename KernelFactory>
std::vector<double> enumerate_parallel(std::uint64_t total, int workers,
                                       KernelFactory&& factory) {
  workers = std::max(1, workers);
  const std::uint64_t chunk = (total + workers - 1) / workers;
  std::vector<std::vector<double>> partial(static_cast<std::size_t>(workers));
  std::vector<std::thread> threads;
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&, w]() {
      auto kernel = factory();
      const std::uint64_t lo = static_cast<std::uint64_t>(w) * chunk;
      const std::uint64_t hi = std::min(total, lo + chunk);
      auto& out = partial[static_cast<std::size_t>(w)];
      for (std::uint64_t i = lo; i < hi; ++i) {
        if (!kernel.keep(i)) continue;
        out.push_back(kernel.loss_at(i));
      }
    });
  }
  for (auto& t : threads) t.join();
  std::vector<double> all;
  for (auto& p : partial) all.insert(all.end(), p.begin(), p.end());
  return all;
}

struct ScalarEnumKernel {
  ScalarKernel k;
  bool keep(std::uint64_t) const { return true; }
  double loss_at(std::uint64_t i) { return k.loss(i); }
};

struct ConvEnumKernel {
  ConvKernel k;
  bool keep(std::uint64_t i) const { return k.canonical(i); }
  double loss_at(std::uint64_t i) { return k.loss(i); }
};

}  // namespace

double scalar_net_forward(const SignAssignment& assignment, double x,
                          const ScalarNetSpec& spec) {
  const auto sizes = spec.layer_sizes();
  std::vector<double> act;
  if (spec.variant == ScalarVariant::Raw)
    act = {x};
  else
    act = {x, 0.5};

  int k = 0;
  auto next = [&]() { return assignment.weight(k++); };
  std::vector<std::vector<double>> weights;  // per layer, out-major
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    std::vector<double> w(static_cast<std::size_t>(sizes[l]) * sizes[l + 1]);
    for (auto& v : w) v = next();
    weights.push_back(std::move(w));
  }
  std::vector<double> bias1(3, 0.0);
  if (spec.first_layer_bias)
    for (auto& b : bias1) b = next();

  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    std::vector<double> out(static_cast<std::size_t>(sizes[l + 1]), 0.0);
    for (int r = 0; r < sizes[l + 1]; ++r) {
      double acc = (l == 0 && spec.first_layer_bias) ? bias1[static_cast<std::size_t>(r)] : 0.0;
      for (int c = 0; c < sizes[l]; ++c)
        acc += weights[l][static_cast<std::size_t>(r * sizes[l] + c)] *
               act[static_cast<std::size_t>(c)];
      out[static_cast<std::size_t>(r)] = acc;
    }
    const bool last = (l + 2 == sizes.size());
    if (!last)
      for (auto& v : out) v = std::tanh(v);
    act = std::move(out);
  }
  return act[0];
}

double scalar_net_loss(std::uint64_t index, const ScalarNetSpec& spec,
                       const std::vector<std::pair<double, int>>& data) {
  ScalarKernel kernel(spec, data);
  return kernel.loss(index);
}

LossLandscape enumerate_scalar(const ScalarNetSpec& spec,
                               const std::vector<std::pair<double, int>>& data,
                               double tol, int workers) {
  const int bits = spec.bit_count();
  if (bits > kMaxEnumerationBits)
    throw std::invalid_argument("enumerate_scalar: " + std::to_string(bits) +
                                " bits exceeds cap of " +
                                std::to_string(kMaxEnumerationBits));
  const std::uint64_t total = 1ull << bits;
  auto losses = enumerate_parallel(total, workers, [&]() {
    return ScalarEnumKernel{ScalarKernel(spec, data)};
  });
  std::sort(losses.begin(), losses.end(), std::greater<double>());

  LossLandscape out;
  out.losses = std::move(losses);
  out.groups = group_losses(out.losses, tol);
  out.tol = tol;
  out.config_count = total;
  out.spec_id = scalar_spec_id(spec);
  out.dataset_id = "grid" + std::to_string(data.size());
  return out;
}

std::uint64_t swap_hidden_units(std::uint64_t index, const ScalarNetSpec& spec,
                                int hidden_layer, int unit_a, int unit_b) {
  const auto sizes = spec.layer_sizes();
  if (hidden_layer < 1 || hidden_layer > 3)
    throw std::invalid_argument("swap_hidden_units: hidden layer in [1, 3]");
  if (unit_a == unit_b) return index;

  std::vector<int> offsets;  // weight bit offset per layer
  int off = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    offsets.push_back(off);
    off += sizes[l] * sizes[l + 1];
  }
  const int bias_off = off;

  auto getbit = [&](int k) { return (index >> k) & 1ull; };
  auto setbit = [](std::uint64_t& v, int k, std::uint64_t b) {
    v = (v & ~(1ull << k)) | (b << k);
  };

  std::uint64_t out = index;
  const int l = hidden_layer - 1;  // incoming weight layer index
  // incoming rows of W_l (out-major layout: row r spans sizes[l] bits)
  for (int c = 0; c < sizes[l]; ++c) {
    const int ka = offsets[static_cast<std::size_t>(l)] + unit_a * sizes[l] + c;
    const int kb = offsets[static_cast<std::size_t>(l)] + unit_b * sizes[l] + c;
    const auto ba = getbit(ka), bb = getbit(kb);
    setbit(out, ka, bb);
    setbit(out, kb, ba);
  }
  // outgoing columns of W_{l+1}
  for (int r = 0; r < sizes[static_cast<std::size_t>(l) + 2]; ++r) {
    const int ka = offsets[static_cast<std::size_t>(l) + 1] + r * sizes[l + 1] + unit_a;
    const int kb = offsets[static_cast<std::size_t>(l) + 1] + r * sizes[l + 1] + unit_b;
    const auto ba = getbit(ka), bb = getbit(kb);
    setbit(out, ka, bb);
    setbit(out, kb, ba);
  }
  if (spec.first_layer_bias && hidden_layer == 1) {
    const int ka = bias_off + unit_a;
    const int kb = bias_off + unit_b;
    const auto ba = getbit(ka), bb = getbit(kb);
    setbit(out, ka, bb);
    setbit(out, kb, ba);
  }
  return out;
}

std::uint64_t flip_unit_signs(std::uint64_t index, const ScalarNetSpec& spec,
                              int hidden_layer, int unit) {
  const auto sizes = spec.layer_sizes();
  if (hidden_layer < 1 || hidden_layer > 3)
    throw std::invalid_argument("flip_unit_signs: hidden layer in [1, 3]");
  std::vector<int> offsets;
  int off = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    offsets.push_back(off);
    off += sizes[l] * sizes[l + 1];
  }
  const int bias_off = off;

  std::uint64_t out = index;
  const int l = hidden_layer - 1;
  for (int c = 0; c < sizes[l]; ++c)
    out ^= 1ull << (offsets[static_cast<std::size_t>(l)] + unit * sizes[l] + c);
  for (int r = 0; r < sizes[static_cast<std::size_t>(l) + 2]; ++r)
    out ^= 1ull << (offsets[static_cast<std::size_t>(l) + 1] + r * sizes[l + 1] + unit);
  if (spec.first_layer_bias && hidden_layer == 1)
    out ^= 1ull << (bias_off + unit);
  return out;
}

std::vector<double> convnet2x2_forward(const SignAssignment& assignment,
                                       const Tensor& image,
                                       const ConvNet2x2Spec& spec,
                                       const datasets::LabeledImageSet& batch_context) {
  // Evaluate through the kernel on a context set extended with the query
  // image so batchnorm statistics stay dataset-wide.
  datasets::LabeledImageSet ctx = batch_context;
  ctx.images.push_back(image);
  ctx.labels.push_back(0);
  ConvKernel kernel(spec, ctx);
  kernel.loss(assignment.index);
  const auto& logits = kernel.last_logits();
  const Eigen::Index last = logits.cols() - 1;
  return {logits(0, last), logits(1, last)};
}

double convnet2x2_loss(std::uint64_t index, const ConvNet2x2Spec& spec,
                       const datasets::LabeledImageSet& data) {
  ConvKernel kernel(spec, data);
  return kernel.loss(index);
}

std::vector<double> orbit_average_forward(const SignAssignment& assignment,
                                          const Tensor& image,
                                          const ConvNet2x2Spec& spec,
                                          const datasets::TransformGroup& group) {
  ConvNet2x2Spec base = spec;
  base.variant = ConvVariant::Baseline;
  datasets::LabeledImageSet singleton;
  singleton.name = "orbit-query";
  double z0 = 0.0, z1 = 0.0;
  for (auto t : group.elements()) {
    singleton.images = {datasets::apply_transform(image, t)};
    singleton.labels = {0};
    ConvKernel kernel(base, singleton);
    kernel.loss(assignment.index);
    z0 += kernel.last_logits()(0, 0);
    z1 += kernel.last_logits()(1, 0);
  }
  const double n = static_cast<double>(group.elements().size());
  return {z0 / n, z1 / n};
}

bool is_canonical(std::uint64_t index, const ConvNet2x2Spec& spec) {
  if (spec.variant != ConvVariant::Equivariant &&
      spec.variant != ConvVariant::WrongEquivariant)
    return true;
  datasets::LabeledImageSet dummy;
  dummy.images = {Tensor({2, 2, 1})};
  dummy.labels = {0};
  ConvKernel kernel(spec, dummy);
  return kernel.canonical(index);
}

LossLandscape enumerate_convnet(const ConvNet2x2Spec& spec,
                                const datasets::LabeledImageSet& data,
                                double tol, int workers) {
  const int bits = spec.bit_count();
  if (bits > kMaxEnumerationBits)
    throw std::invalid_argument("enumerate_convnet: " + std::to_string(bits) +
                                " bits exceeds cap of " +
                                std::to_string(kMaxEnumerationBits));
  const std::uint64_t total = 1ull << bits;
  auto losses = enumerate_parallel(total, workers, [&]() {
    return ConvEnumKernel{ConvKernel(spec, data)};
  });
  std::sort(losses.begin(), losses.end(), std::greater<double>());

  LossLandscape out;
  out.losses = std::move(losses);
  out.groups = group_losses(out.losses, tol);
  out.tol = tol;
  out.config_count = static_cast<std::uint64_t>(out.losses.size());
  out.spec_id = conv_spec_id(spec);
  out.dataset_id = data.name;
  out.seed = spec.seed;
  return out;
}

DegeneracyProfile degeneracy_profile(const LossLandscape& landscape) {
  if (landscape.losses.empty())
    throw std::invalid_argument("degeneracy_profile: empty landscape");
  DegeneracyProfile p;
  p.distinct_levels = static_cast<std::int64_t>(landscape.groups.size());
  for (const auto& g : landscape.groups)
    p.max_multiplicity = std::max(p.max_multiplicity, g.multiplicity);
  // Mean plateau size as a fraction of the landscape (1 / distinct levels).
  // The largest group is the architecture-independent logit-collapse family
  // (e.g. equal output rows), so its size cannot distinguish the variants;
  // the mean-size statistic tracks the degeneracy splitting directly.
  p.plateau_fraction = 1.0 / static_cast<double>(p.distinct_levels);
  return p;
}

LandscapeComparison compare_landscapes(const LossLandscape& a,
                                       const LossLandscape& b) {
  if (a.dataset_id != b.dataset_id)
    throw std::invalid_argument("compare_landscapes: dataset mismatch (" +
                                a.dataset_id + " vs " + b.dataset_id + ")");
  const auto pa = degeneracy_profile(a);
  const auto pb = degeneracy_profile(b);
  return {a.losses.back(), b.losses.back(), pa.distinct_levels,
          pb.distinct_levels, pa.plateau_fraction, pb.plateau_fraction};
}

std::int64_t group_of(const LossLandscape& landscape, double loss) {
  // Group representatives are strictly decreasing with gaps > tol, so the
  // containing group is the last one with representative >= loss.
  const auto& groups = landscape.groups;
  auto it = std::lower_bound(groups.begin(), groups.end(), loss,
                             [](const LossGroup& g, double v) { return g.loss >= v; });
  // `it` is the first group with representative < loss; step back.
  if (it == groups.begin())
    it = groups.begin();
  else
    --it;
  const double rep = it->loss;
  const double slack = 1e-15 + landscape.tol * 1e-6;
  if (loss > rep + landscape.tol + slack || loss < rep - landscape.tol - slack)
    throw std::invalid_argument("group_of: loss value not present in landscape");
  return static_cast<std::int64_t>(it - groups.begin());
}

}  // namespace landscape
}  // namespace symlab
