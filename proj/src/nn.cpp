#include "symlab/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "symlab/errors.hpp"

namespace symlab {
namespace nn {

namespace {

std::int64_t prod(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

using RowMajorMap = Eigen::Map<
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstRowMajorMap = Eigen::Map<
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

}  // namespace

// Activations flow through layers as N x F matrices (per-sample flattening in
// H, W, C order); each layer knows its per-sample shape.
class Layer {
public:
  virtual ~Layer() = default;
  virtual std::int64_t param_count() const { return 0; }
  virtual void init(double* p, Prng& prng) { (void)p; (void)prng; }
  virtual Eigen::MatrixXd forward(const Eigen::MatrixXd& x, const double* p,
                                  Mode mode, Prng& prng) = 0;
  virtual Eigen::MatrixXd backward(const Eigen::MatrixXd& dy, const double* p,
                                   double* dp) = 0;
  std::vector<std::int64_t> in_shape, out_shape;
};

namespace {

void init_uniform(double* p, std::int64_t n, std::int64_t fan_in, Prng& prng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (std::int64_t i = 0; i < n; ++i) p[i] = prng.uniform(-bound, bound);
}

class DenseLayer : public Layer {
public:
  DenseLayer(int in, int out) : in_(in), out_(out) {}
  std::int64_t param_count() const override {
    return static_cast<std::int64_t>(out_) * in_ + out_;
  }
  void init(double* p, Prng& prng) override {
    init_uniform(p, param_count(), in_, prng);
  }
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, const double* p, Mode,
                          Prng&) override {
    x_ = x;
    ConstRowMajorMap w(p, out_, in_);
    Eigen::Map<const Eigen::VectorXd> b(p + out_ * in_, out_);
    Eigen::MatrixXd y = x * w.transpose();
    y.rowwise() += b.transpose();
    return y;
  }
  Eigen::MatrixXd backward(const Eigen::MatrixXd& dy, const double* p,
                           double* dp) override {
    ConstRowMajorMap w(p, out_, in_);
    RowMajorMap dw(dp, out_, in_);
    Eigen::Map<Eigen::VectorXd> db(dp + out_ * in_, out_);
    dw += dy.transpose() * x_;
    db += dy.colwise().sum().transpose();
    return dy * w;
  }

private:
  int in_, out_;
  Eigen::MatrixXd x_;
};

class Conv2dLayer : public Layer {
public:
  Conv2dLayer(int in_c, int out_c, int k) : ic_(in_c), oc_(out_c), k_(k) {}
  std::int64_t param_count() const override {
    return static_cast<std::int64_t>(oc_) * k_ * k_ * ic_ + oc_;
  }
  void init(double* p, Prng& prng) override {
    init_uniform(p, param_count(), static_cast<std::int64_t>(k_) * k_ * ic_, prng);
  }
  void set_shapes() {
    h_ = static_cast<int>(in_shape[0]);
    w_ = static_cast<int>(in_shape[1]);
    oh_ = h_ - k_ + 1;
    ow_ = w_ - k_ + 1;
  }
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, const double* p, Mode,
                          Prng&) override {
    x_ = x;
    const Eigen::Index n = x.rows();
    Eigen::MatrixXd y(n, static_cast<Eigen::Index>(oh_) * ow_ * oc_);
    const double* b = p + static_cast<std::int64_t>(oc_) * k_ * k_ * ic_;
    for (Eigen::Index s = 0; s < n; ++s) {
      for (int oy = 0; oy < oh_; ++oy)
        for (int ox = 0; ox < ow_; ++ox)
          for (int oc = 0; oc < oc_; ++oc) {
            double acc = b[oc];
            const double* wk = p + (static_cast<std::int64_t>(oc) * k_ * k_) * ic_;
            for (int ky = 0; ky < k_; ++ky)
              for (int kx = 0; kx < k_; ++kx)
                for (int c = 0; c < ic_; ++c)
                  acc += wk[(ky * k_ + kx) * ic_ + c] *
                         x(s, ((oy + ky) * w_ + (ox + kx)) * ic_ + c);
            y(s, (oy * ow_ + ox) * oc_ + oc) = acc;
          }
    }
    return y;
  }
  Eigen::MatrixXd backward(const Eigen::MatrixXd& dy, const double* p,
                           double* dp) override {
    const Eigen::Index n = dy.rows();
    Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(n, x_.cols());
    double* db = dp + static_cast<std::int64_t>(oc_) * k_ * k_ * ic_;
    for (Eigen::Index s = 0; s < n; ++s) {
      for (int oy = 0; oy < oh_; ++oy)
        for (int ox = 0; ox < ow_; ++ox)
          for (int oc = 0; oc < oc_; ++oc) {
            const double g = dy(s, (oy * ow_ + ox) * oc_ + oc);
            db[oc] += g;
            const double* wk = p + (static_cast<std::int64_t>(oc) * k_ * k_) * ic_;
            double* dwk = dp + (static_cast<std::int64_t>(oc) * k_ * k_) * ic_;
            for (int ky = 0; ky < k_; ++ky)
              for (int kx = 0; kx < k_; ++kx)
                for (int c = 0; c < ic_; ++c) {
                  const Eigen::Index xi = ((oy + ky) * w_ + (ox + kx)) * ic_ + c;
                  dwk[(ky * k_ + kx) * ic_ + c] += g * x_(s, xi);
                  dx(s, xi) += g * wk[(ky * k_ + kx) * ic_ + c];
                }
          }
    }
    return dx;
  }

  int ic_, oc_, k_;
  int h_ = 0, w_ = 0, oh_ = 0, ow_ = 0;

private:
  Eigen::MatrixXd x_;
};

class MaxPool2Layer : public Layer {
public:
  void set_shapes() {
    h_ = static_cast<int>(in_shape[0]);
    w_ = static_cast<int>(in_shape[1]);
    c_ = static_cast<int>(in_shape[2]);
    oh_ = h_ / 2;
    ow_ = w_ / 2;
  }
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, const double*, Mode,
                          Prng&) override {
    const Eigen::Index n = x.rows();
    in_cols_ = x.cols();
    Eigen::MatrixXd y(n, static_cast<Eigen::Index>(oh_) * ow_ * c_);
    argmax_.resize(n, y.cols());
    for (Eigen::Index s = 0; s < n; ++s)
      for (int oy = 0; oy < oh_; ++oy)
        for (int ox = 0; ox < ow_; ++ox)
          for (int c = 0; c < c_; ++c) {
            double best = -std::numeric_limits<double>::infinity();
            Eigen::Index besti = 0;
            for (int dy = 0; dy < 2; ++dy)
              for (int dx = 0; dx < 2; ++dx) {
                const Eigen::Index xi =
                    ((2 * oy + dy) * static_cast<Eigen::Index>(w_) + 2 * ox + dx) * c_ + c;
                if (x(s, xi) > best) {
                  best = x(s, xi);
                  besti = xi;
                }
              }
            y(s, (oy * ow_ + ox) * c_ + c) = best;
            argmax_(s, (oy * ow_ + ox) * c_ + c) = besti;
          }
    return y;
  }
  Eigen::MatrixXd backward(const Eigen::MatrixXd& dy, const double*,
                           double*) override {
    Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(dy.rows(), in_cols_);
    for (Eigen::Index s = 0; s < dy.rows(); ++s)
      for (Eigen::Index j = 0; j < dy.cols(); ++j)
        dx(s, argmax_(s, j)) += dy(s, j);
    return dx;
  }

  int h_ = 0, w_ = 0, c_ = 0, oh_ = 0, ow_ = 0;

private:
  Eigen::Index in_cols_ = 0;
  Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic> argmax_;
};

class ReluLayer : public Layer {
public:
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, const double*, Mode,
                          Prng&) override {
    mask_ = (x.array() > 0.0).cast<double>();
    return x.cwiseProduct(mask_);
  }
  Eigen::MatrixXd backward(const Eigen::MatrixXd& dy, const double*,
                           double*) override {
    return dy.cwiseProduct(mask_);
  }

private:
  Eigen::MatrixXd mask_;
};

class TanhLayer : public Layer {
public:
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, const double*, Mode,
                          Prng&) override {
    y_ = x.array().tanh();
    return y_;
  }
  Eigen::MatrixXd backward(const Eigen::MatrixXd& dy, const double*,
                           double*) override {
    return dy.array() * (1.0 - y_.array().square());
  }

private:
  Eigen::MatrixXd y_;
};

class SigmoidLayer : public Layer {
public:
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, const double*, Mode,
                          Prng&) override {
    y_ = 1.0 / (1.0 + (-x.array()).exp());
    return y_;
  }
  Eigen::MatrixXd backward(const Eigen::MatrixXd& dy, const double*,
                           double*) override {
    return dy.array() * y_.array() * (1.0 - y_.array());
  }

private:
  Eigen::MatrixXd y_;
};

class SoftplusLayer : public Layer {
public:
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, const double*, Mode,
                          Prng&) override {
    sig_ = 1.0 / (1.0 + (-x.array()).exp());
    // log(1 + e^x) = max(x, 0) + log1p(e^{-|x|})
    return x.array().max(0.0) +
           (-x.array().abs()).exp().unaryExpr([](double v) { return std::log1p(v); });
  }
  Eigen::MatrixXd backward(const Eigen::MatrixXd& dy, const double*,
                           double*) override {
    return dy.cwiseProduct(sig_);
  }

private:
  Eigen::MatrixXd sig_;
};

class BatchNorm2dLayer : public Layer {
public:
  explicit BatchNorm2dLayer(int channels) : c_(channels) {
    running_mean_ = Eigen::VectorXd::Zero(c_);
    running_var_ = Eigen::VectorXd::Ones(c_);
  }
  std::int64_t param_count() const override { return 2 * c_; }
  void init(double* p, Prng&) override {
    for (int c = 0; c < c_; ++c) p[c] = 1.0;        // gamma
    for (int c = 0; c < c_; ++c) p[c_ + c] = 0.0;   // beta
  }
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, const double* p, Mode mode,
                          Prng&) override {
    const Eigen::Index n = x.rows();
    const Eigen::Index spatial = x.cols() / c_;
    const double m = static_cast<double>(n * spatial);
    train_ = (mode == Mode::Train);
    Eigen::Map<const Eigen::VectorXd> gamma(p, c_);
    Eigen::Map<const Eigen::VectorXd> beta(p + c_, c_);

    Eigen::VectorXd mean(c_), var(c_);
    if (train_) {
      mean.setZero();
      for (Eigen::Index s = 0; s < n; ++s)
        for (Eigen::Index j = 0; j < x.cols(); ++j) mean(j % c_) += x(s, j);
      mean /= m;
      var.setZero();
      for (Eigen::Index s = 0; s < n; ++s)
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
          const double d = x(s, j) - mean(j % c_);
          var(j % c_) += d * d;
        }
      var /= m;
      running_mean_ = (1.0 - kMomentum) * running_mean_ + kMomentum * mean;
      running_var_ = (1.0 - kMomentum) * running_var_ + kMomentum * var;
      m_ = m;
    } else {
      mean = running_mean_;
      var = running_var_;
    }

    inv_std_ = (var.array() + kEps).sqrt().inverse();
    xhat_.resize(n, x.cols());
    Eigen::MatrixXd y(n, x.cols());
    for (Eigen::Index s = 0; s < n; ++s)
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const int c = static_cast<int>(j % c_);
        xhat_(s, j) = (x(s, j) - mean(c)) * inv_std_(c);
        y(s, j) = gamma(c) * xhat_(s, j) + beta(c);
      }
    return y;
  }
  Eigen::MatrixXd backward(const Eigen::MatrixXd& dy, const double* p,
                           double* dp) override {
    Eigen::Map<const Eigen::VectorXd> gamma(p, c_);
    Eigen::Map<Eigen::VectorXd> dgamma(dp, c_);
    Eigen::Map<Eigen::VectorXd> dbeta(dp + c_, c_);

    Eigen::VectorXd sum_dy = Eigen::VectorXd::Zero(c_);
    Eigen::VectorXd sum_dy_xhat = Eigen::VectorXd::Zero(c_);
    for (Eigen::Index s = 0; s < dy.rows(); ++s)
      for (Eigen::Index j = 0; j < dy.cols(); ++j) {
        const int c = static_cast<int>(j % c_);
        sum_dy(c) += dy(s, j);
        sum_dy_xhat(c) += dy(s, j) * xhat_(s, j);
      }
    dgamma += sum_dy_xhat;
    dbeta += sum_dy;

    Eigen::MatrixXd dx(dy.rows(), dy.cols());
    if (train_) {
      for (Eigen::Index s = 0; s < dy.rows(); ++s)
        for (Eigen::Index j = 0; j < dy.cols(); ++j) {
          const int c = static_cast<int>(j % c_);
          dx(s, j) = gamma(c) * inv_std_(c) *
                     (dy(s, j) - sum_dy(c) / m_ - xhat_(s, j) * sum_dy_xhat(c) / m_);
        }
    } else {
      for (Eigen::Index s = 0; s < dy.rows(); ++s)
        for (Eigen::Index j = 0; j < dy.cols(); ++j) {
          const int c = static_cast<int>(j % c_);
          dx(s, j) = gamma(c) * inv_std_(c) * dy(s, j);
        }
    }
    return dx;
  }

  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

private:
  int c_;
  bool train_ = false;
  double m_ = 1.0;
  Eigen::VectorXd running_mean_, running_var_, inv_std_;
  Eigen::MatrixXd xhat_;
};

// Inverted dropout: scale by 1/(1-p) at train time, identity in eval.
class DropoutLayer : public Layer {
public:
  explicit DropoutLayer(double rate) : rate_(rate) {
    if (rate < 0.0 || rate >= 1.0)
      throw std::invalid_argument("dropout rate must be in [0, 1)");
  }
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, const double*, Mode mode,
                          Prng& prng) override {
    if (mode == Mode::Eval || rate_ == 0.0) {
      active_ = false;
      return x;
    }
    active_ = true;
    const double scale = 1.0 / (1.0 - rate_);
    mask_.resize(x.rows(), x.cols());
    for (Eigen::Index s = 0; s < x.rows(); ++s)
      for (Eigen::Index j = 0; j < x.cols(); ++j)
        mask_(s, j) = (prng.uniform() < rate_) ? 0.0 : scale;
    return x.cwiseProduct(mask_);
  }
  Eigen::MatrixXd backward(const Eigen::MatrixXd& dy, const double*,
                           double*) override {
    return active_ ? dy.cwiseProduct(mask_).eval() : dy;
  }

private:
  double rate_;
  bool active_ = false;
  Eigen::MatrixXd mask_;
};

class FlattenLayer : public Layer {
public:
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, const double*, Mode,
                          Prng&) override {
    return x;
  }
  Eigen::MatrixXd backward(const Eigen::MatrixXd& dy, const double*,
                           double*) override {
    return dy;
  }
};

std::unique_ptr<Layer> make_layer(const LayerSpec& s) {
  switch (s.kind) {
    case LayerKind::Dense: return std::make_unique<DenseLayer>(s.in, s.out);
    case LayerKind::Conv2d: return std::make_unique<Conv2dLayer>(s.in, s.out, s.kernel);
    case LayerKind::MaxPool2: return std::make_unique<MaxPool2Layer>();
    case LayerKind::Relu: return std::make_unique<ReluLayer>();
    case LayerKind::Tanh: return std::make_unique<TanhLayer>();
    case LayerKind::Sigmoid: return std::make_unique<SigmoidLayer>();
    case LayerKind::Softplus: return std::make_unique<SoftplusLayer>();
    case LayerKind::BatchNorm2d: return std::make_unique<BatchNorm2dLayer>(s.in);
    case LayerKind::Dropout: return std::make_unique<DropoutLayer>(s.rate);
    case LayerKind::Flatten: return std::make_unique<FlattenLayer>();
  }
  throw std::invalid_argument("unknown layer kind");
}

std::vector<std::int64_t> chain_shape(const LayerSpec& s,
                                      const std::vector<std::int64_t>& in,
                                      std::size_t index) {
  auto fail = [&](const std::string& msg) {
    throw std::invalid_argument("layer " + std::to_string(index) + ": " + msg +
                                " (input shape " + shape_string(in) + ")");
  };
  switch (s.kind) {
    case LayerKind::Dense:
      if (in.size() != 1 || in[0] != s.in) fail("dense expects flat input of size " + std::to_string(s.in));
      return {s.out};
    case LayerKind::Conv2d: {
      if (in.size() != 3) fail("conv2d expects H x W x C input");
      if (in[2] != s.in) fail("conv2d channel mismatch");
      if (in[0] < s.kernel || in[1] < s.kernel) fail("conv2d kernel larger than input");
      return {in[0] - s.kernel + 1, in[1] - s.kernel + 1, s.out};
    }
    case LayerKind::MaxPool2:
      if (in.size() != 3) fail("maxpool2 expects H x W x C input");
      if (in[0] < 2 || in[1] < 2) fail("maxpool2 needs spatial extents >= 2");
      return {in[0] / 2, in[1] / 2, in[2]};
    case LayerKind::BatchNorm2d:
      if (in.size() != 3 || in[2] != s.in) fail("batchnorm2d channel mismatch");
      return in;
    case LayerKind::Flatten:
      return {prod(in)};
    default:
      return in;  // elementwise
  }
}

void apply_augment(Tensor& batch, AugmentKind kind, Prng& prng) {
  if (kind == AugmentKind::None) return;
  const auto& shape = batch.shape();
  if (shape.size() != 4)
    throw std::invalid_argument("augmentation expects an N x H x W x C batch");
  const std::int64_t n = shape[0], h = shape[1], w = shape[2], c = shape[3];
  const std::int64_t stride = h * w * c;
  std::vector<double> tmp(static_cast<std::size_t>(stride));
  for (std::int64_t s = 0; s < n; ++s) {
    if (prng.uniform() >= 0.5) continue;
    double* img = batch.data() + s * stride;
    std::memcpy(tmp.data(), img, sizeof(double) * stride);
    for (std::int64_t i = 0; i < h; ++i)
      for (std::int64_t j = 0; j < w; ++j)
        for (std::int64_t ch = 0; ch < c; ++ch) {
          const std::int64_t si = (kind == AugmentKind::RandomHFlip) ? i : h - 1 - i;
          const std::int64_t sj = w - 1 - j;
          img[(i * w + j) * c + ch] = tmp[(si * w + sj) * c + ch];
        }
  }
}

}  // namespace

Model::Model(NetworkSpec spec) : spec_(std::move(spec)) {
  if (spec_.input_shape.empty())
    throw std::invalid_argument("NetworkSpec: empty input shape");
  std::vector<std::int64_t> shape = spec_.input_shape;
  std::int64_t nparams = 0;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    auto out = chain_shape(spec_.layers[i], shape, i);
    auto layer = make_layer(spec_.layers[i]);
    layer->in_shape = shape;
    layer->out_shape = out;
    if (auto* conv = dynamic_cast<Conv2dLayer*>(layer.get())) conv->set_shapes();
    if (auto* pool = dynamic_cast<MaxPool2Layer*>(layer.get())) pool->set_shapes();
    nparams += layer->param_count();
    layers_.push_back(std::move(layer));
    shape = out;
  }
  output_shape_ = shape;
  params_ = Eigen::VectorXd::Zero(nparams);
}

Model::~Model() = default;

void Model::init_params(Prng& prng) {
  std::int64_t off = 0;
  for (auto& layer : layers_) {
    layer->init(params_.data() + off, prng);
    off += layer->param_count();
  }
}

Eigen::MatrixXd Model::forward_raw(const Tensor& batch, Mode mode, Prng& prng) {
  if (batch.rank() != static_cast<std::int64_t>(spec_.input_shape.size()) + 1)
    throw std::invalid_argument("forward: batch rank mismatch, expected [N] + " +
                                shape_string(spec_.input_shape));
  for (std::size_t d = 0; d < spec_.input_shape.size(); ++d)
    if (batch.extent(d + 1) != spec_.input_shape[d])
      throw std::invalid_argument("forward: batch shape mismatch at dim " +
                                  std::to_string(d + 1));
  const Eigen::Index n = batch.extent(0);
  const Eigen::Index f = prod(spec_.input_shape);

  Eigen::MatrixXd x;
  if (mode == Mode::Train && spec_.augment != AugmentKind::None) {
    Tensor augmented = batch;
    apply_augment(augmented, spec_.augment, prng);
    x = ConstRowMajorMap(augmented.data(), n, f);
  } else {
    x = ConstRowMajorMap(batch.data(), n, f);
  }

  std::int64_t off = 0;
  for (auto& layer : layers_) {
    x = layer->forward(x, params_.data() + off, mode, prng);
    off += layer->param_count();
  }
  last_outputs_ = x;
  last_mode_ = mode;
  return x;
}

double Model::forward(const Tensor& batch, const Tensor& targets, Mode mode,
                      Prng& prng, Eigen::MatrixXd* outputs) {
  Eigen::MatrixXd out = forward_raw(batch, mode, prng);
  LossResult lr = compute_loss(spec_.loss, out, targets);
  loss_grad_ = std::move(lr.grad);
  if (outputs) *outputs = std::move(out);
  return lr.loss;
}

Eigen::VectorXd Model::backward() {
  return backward_from_output_grad(loss_grad_);
}

Eigen::VectorXd Model::backward_from_output_grad(const Eigen::MatrixXd& output_grad) {
  Eigen::VectorXd grads = Eigen::VectorXd::Zero(params_.size());
  Eigen::MatrixXd dy = output_grad;
  std::int64_t off = params_.size();
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    off -= (*it)->param_count();
    dy = (*it)->backward(dy, params_.data() + off, grads.data() + off);
  }
  return grads;
}

LossResult Model_compute_mse(const Eigen::MatrixXd& outputs, const Tensor& targets) {
  LossResult r;
  ConstRowMajorMap t(targets.data(), outputs.rows(), outputs.cols());
  const double numel = static_cast<double>(outputs.size());
  Eigen::MatrixXd diff = outputs - t;
  r.loss = diff.squaredNorm() / numel;
  r.grad = (2.0 / numel) * diff;
  return r;
}

LossResult compute_loss(LossKind kind, const Eigen::MatrixXd& outputs,
                        const Tensor& targets) {
  if (kind == LossKind::MeanSquaredError) {
    if (targets.size() != outputs.size())
      throw std::invalid_argument("MSE: target size mismatch");
    return Model_compute_mse(outputs, targets);
  }
  // Softmax cross-entropy; targets hold class indices.
  if (targets.size() != outputs.rows())
    throw std::invalid_argument("cross-entropy: expected one label per sample");
  LossResult r;
  const Eigen::Index n = outputs.rows(), k = outputs.cols();
  r.grad.resize(n, k);
  r.loss = 0.0;
  for (Eigen::Index s = 0; s < n; ++s) {
    const int label = static_cast<int>(targets[s]);
    if (label < 0 || label >= k)
      throw std::invalid_argument("cross-entropy: label out of range");
    Eigen::VectorXd row = outputs.row(s);
    const double mx = row.maxCoeff();
    Eigen::VectorXd e = (row.array() - mx).exp();
    const double z = e.sum();
    r.loss += -(row(label) - mx - std::log(z));
    r.grad.row(s) = (e / z).transpose() / static_cast<double>(n);
    r.grad(s, label) -= 1.0 / static_cast<double>(n);
  }
  r.loss /= static_cast<double>(n);
  return r;
}

namespace {

Tensor gather_rows(const Tensor& t, const std::vector<std::int64_t>& idx) {
  std::vector<std::int64_t> shape = t.shape();
  const std::int64_t stride = t.size() / shape[0];
  shape[0] = static_cast<std::int64_t>(idx.size());
  Tensor out(shape);
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::memcpy(out.data() + static_cast<std::int64_t>(i) * stride,
                t.data() + idx[i] * stride, sizeof(double) * stride);
  return out;
}

class OptimizerState {
public:
  explicit OptimizerState(const TrainConfig& cfg, Eigen::Index n) : cfg_(cfg) {
    if (cfg.optimizer == TrainConfig::Optimizer::Sgd) {
      v_ = Eigen::VectorXd::Zero(n);
    } else {
      m_ = Eigen::VectorXd::Zero(n);
      v_ = Eigen::VectorXd::Zero(n);
    }
  }
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grads) {
    Eigen::VectorXd g = grads;
    if (cfg_.weight_decay != 0.0) g += cfg_.weight_decay * params;
    if (cfg_.optimizer == TrainConfig::Optimizer::Sgd) {
      v_ = cfg_.momentum * v_ + g;
      params -= cfg_.lr * v_;
    } else {
      ++t_;
      m_ = kBeta1 * m_ + (1.0 - kBeta1) * g;
      v_ = kBeta2 * v_.array() + (1.0 - kBeta2) * g.array().square();
      const double bc1 = 1.0 - std::pow(kBeta1, t_);
      const double bc2 = 1.0 - std::pow(kBeta2, t_);
      params.array() -= cfg_.lr * (m_.array() / bc1) /
                        ((v_.array() / bc2).sqrt() + kEps);
    }
  }
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

private:
  TrainConfig cfg_;
  Eigen::VectorXd m_, v_;
  int t_ = 0;
};

}  // namespace

TrainResult train(Model& model, const Dataset& data, const TrainConfig& config) {
  if (config.lr <= 0.0) throw std::invalid_argument("train: lr must be > 0");
  if (config.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (config.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  const std::int64_t n = data.size();
  if (n < 1) throw std::invalid_argument("train: empty dataset");

  Prng root(config.seed);
  Prng init_stream = root.substream(Prng::hash_string("init"));
  model.init_params(init_stream);
  Prng fwd_stream = root.substream(Prng::hash_string("forward"));

  OptimizerState opt(config, model.params().size());
  TrainResult result;

  std::vector<std::int64_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  const std::int64_t target_stride =
      data.targets.size() / data.targets.extent(0);
  (void)target_stride;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Prng shuffle = root.substream(Prng::hash_string("shuffle"), epoch);
    for (std::int64_t i = n - 1; i > 0; --i)
      std::swap(order[i], order[shuffle.below(static_cast<std::uint64_t>(i + 1))]);

    double epoch_loss = 0.0;
    for (std::int64_t start = 0; start < n; start += config.batch_size) {
      const std::int64_t stop = std::min<std::int64_t>(start + config.batch_size, n);
      std::vector<std::int64_t> idx(order.begin() + start, order.begin() + stop);
      Tensor inputs = gather_rows(data.inputs, idx);
      Tensor targets = gather_rows(data.targets, idx);
      const double loss = model.forward(inputs, targets, Mode::Train, fwd_stream);
      if (!std::isfinite(loss))
        throw TrainingDiverged("train: non-finite loss at epoch " +
                               std::to_string(epoch), epoch);
      Eigen::VectorXd grads = model.backward();
      opt.step(model.params(), grads);
      epoch_loss += loss * static_cast<double>(stop - start);
    }

    EpochStats stats;
    stats.loss = epoch_loss / static_cast<double>(n);
    if (model.spec().loss == LossKind::SoftmaxCrossEntropy)
      stats.accuracy = accuracy(model, data);
    result.trace.push_back(stats);
  }
  return result;
}

double accuracy(Model& model, const Dataset& data) {
  Prng dummy(0);
  Eigen::MatrixXd out = model.forward_raw(data.inputs, Mode::Eval, dummy);
  std::int64_t correct = 0;
  for (Eigen::Index s = 0; s < out.rows(); ++s) {
    Eigen::Index pred = 0;
    out.row(s).maxCoeff(&pred);
    if (pred == static_cast<Eigen::Index>(data.targets[s])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(out.rows());
}

double gradient_check(Model& model, const Tensor& batch, const Tensor& targets,
                      double eps, std::uint64_t seed) {
  if (model.param_count() > 10000)
    throw std::invalid_argument("gradient_check: param count above desk-scale cap");
  Prng p0(seed);
  model.forward(batch, targets, Mode::Train, p0);
  Eigen::VectorXd analytic = model.backward();

  double worst = 0.0;
  Eigen::VectorXd& params = model.params();
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double saved = params(i);
    params(i) = saved + eps;
    Prng pa(seed);
    const double la = model.forward(batch, targets, Mode::Train, pa);
    params(i) = saved - eps;
    Prng pb(seed);
    const double lb = model.forward(batch, targets, Mode::Train, pb);
    params(i) = saved;
    const double numeric = (la - lb) / (2.0 * eps);
    const double denom = std::max(1e-8, std::abs(analytic(i)) + std::abs(numeric));
    worst = std::max(worst, std::abs(analytic(i) - numeric) / denom);
  }
  return worst;
}

namespace {

nlohmann::json layer_layout_json(const NetworkSpec& spec) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : spec.layers) {
    nlohmann::json j;
    switch (l.kind) {
      case LayerKind::Dense: j = {{"kind", "dense"}, {"in", l.in}, {"out", l.out}}; break;
      case LayerKind::Conv2d:
        j = {{"kind", "conv2d"}, {"in_channels", l.in}, {"out_channels", l.out}, {"kernel", l.kernel}};
        break;
      case LayerKind::MaxPool2: j = {{"kind", "maxpool2"}}; break;
      case LayerKind::Relu: j = {{"kind", "relu"}}; break;
      case LayerKind::Tanh: j = {{"kind", "tanh"}}; break;
      case LayerKind::Sigmoid: j = {{"kind", "sigmoid"}}; break;
      case LayerKind::Softplus: j = {{"kind", "softplus"}}; break;
      case LayerKind::BatchNorm2d: j = {{"kind", "batchnorm2d"}, {"channels", l.in}}; break;
      case LayerKind::Dropout: j = {{"kind", "dropout"}, {"rate", l.rate}}; break;
      case LayerKind::Flatten: j = {{"kind", "flatten"}}; break;
    }
    layers.push_back(j);
  }
  return layers;
}

}  // namespace

void save_params(const Model& model, const std::string& path) {
  std::ofstream bin(path, std::ios::binary);
  if (!bin) throw FormatError("save_params: cannot open " + path);
  const auto& p = model.params();
  bin.write(reinterpret_cast<const char*>(p.data()),
            static_cast<std::streamsize>(sizeof(double) * p.size()));

  nlohmann::json sidecar;
  sidecar["format"] = "symlab-params-v1";
  sidecar["count"] = p.size();
  sidecar["input_shape"] = model.spec().input_shape;
  sidecar["layers"] = layer_layout_json(model.spec());
  std::ofstream js(path + ".json");
  js << sidecar.dump(2) << "\n";
}

Eigen::VectorXd load_params(const std::string& path) {
  std::ifstream js(path + ".json");
  if (!js) throw FormatError("load_params: missing sidecar " + path + ".json");
  nlohmann::json sidecar;
  try {
    js >> sidecar;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("load_params: bad sidecar: ") + e.what());
  }
  const std::int64_t count = sidecar.at("count").get<std::int64_t>();

  std::ifstream bin(path, std::ios::binary);
  if (!bin) throw FormatError("load_params: cannot open " + path);
  Eigen::VectorXd p(count);
  bin.read(reinterpret_cast<char*>(p.data()),
           static_cast<std::streamsize>(sizeof(double) * count));
  if (bin.gcount() != static_cast<std::streamsize>(sizeof(double) * count))
    throw FormatError("load_params: truncated file " + path);
  return p;
}

}  // namespace nn
}  // namespace symlab
