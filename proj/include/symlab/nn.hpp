#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "symlab/prng.hpp"
#include "symlab/tensor.hpp"

namespace symlab {
namespace nn {

enum class LayerKind {
  Dense,
  Conv2d,     // valid padding, stride 1
  MaxPool2,   // 2x2 window, stride 2, floor mode
  Relu,
  Tanh,
  Sigmoid,
  BatchNorm2d,
  Dropout,
  Flatten,
  Softplus,
};

struct LayerSpec {
  LayerKind kind;
  int in = 0;
  int out = 0;
  int kernel = 0;      // conv2d
  double rate = 0.0;   // dropout

  static LayerSpec dense(int in, int out) { return {LayerKind::Dense, in, out}; }
  static LayerSpec conv2d(int in_channels, int out_channels, int kernel) {
    return {LayerKind::Conv2d, in_channels, out_channels, kernel};
  }
  static LayerSpec maxpool2() { return {LayerKind::MaxPool2}; }
  static LayerSpec relu() { return {LayerKind::Relu}; }
  static LayerSpec tanh() { return {LayerKind::Tanh}; }
  static LayerSpec sigmoid() { return {LayerKind::Sigmoid}; }
  static LayerSpec softplus() { return {LayerKind::Softplus}; }
  static LayerSpec batchnorm2d(int channels) { return {LayerKind::BatchNorm2d, channels, channels}; }
  static LayerSpec dropout(double rate) { return {LayerKind::Dropout, 0, 0, 0, rate}; }
  static LayerSpec flatten() { return {LayerKind::Flatten}; }
};

enum class LossKind { SoftmaxCrossEntropy, MeanSquaredError };

// Seed-driven forward-pass augmentation (train mode only); used by the
// equivariance CNN variants, which transform half of each batch.
enum class AugmentKind { None, RandomHFlip, RandomRot180 };

struct NetworkSpec {
  std::vector<std::int64_t> input_shape;  // per-sample, e.g. {8,8,1} or {2}
  std::vector<LayerSpec> layers;
  LossKind loss = LossKind::MeanSquaredError;
  AugmentKind augment = AugmentKind::None;
};

enum class Mode { Train, Eval };

struct TrainConfig {
  enum class Optimizer { Sgd, Adam } optimizer = Optimizer::Adam;
  double lr = 1e-3;
  double momentum = 0.0;      // SGD only
  double weight_decay = 0.0;  // added to the gradient as lambda * theta
  int epochs = 1;
  int batch_size = 64;
  std::uint64_t seed = 0;
};

struct EpochStats {
  double loss = 0.0;
  double accuracy = 0.0;  // only meaningful for cross-entropy
};

class Layer;  // internal

// A network instance: spec + flat parameter vector + layer scratch state.
// Forward caches activations; backward consumes them.
class Model {
public:
  explicit Model(NetworkSpec spec);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;
  ~Model();

  const NetworkSpec& spec() const { return spec_; }
  std::int64_t param_count() const { return params_.size(); }

  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  // Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) per layer; batchnorm gamma=1, beta=0.
  void init_params(Prng& prng);

  // Runs the layers; rows of the result are per-sample outputs.
  Eigen::MatrixXd forward_raw(const Tensor& batch, Mode mode, Prng& prng);

  // forward_raw + loss. Targets: class indices (shape {N}) for cross-entropy,
  // matching output shape for MSE.
  double forward(const Tensor& batch, const Tensor& targets, Mode mode, Prng& prng,
                 Eigen::MatrixXd* outputs = nullptr);

  // Gradient of the scalar loss from the most recent forward().
  Eigen::VectorXd backward();

  // Gradient given an externally supplied d(loss)/d(outputs); pairs with the
  // most recent forward_raw/forward call.
  Eigen::VectorXd backward_from_output_grad(const Eigen::MatrixXd& output_grad);

  const std::vector<std::int64_t>& output_shape() const { return output_shape_; }

private:
  NetworkSpec spec_;
  std::vector<std::unique_ptr<Layer>> layers_;
  Eigen::VectorXd params_;
  std::vector<std::int64_t> output_shape_;  // per-sample

  // forward cache
  Eigen::MatrixXd last_outputs_;
  Eigen::MatrixXd loss_grad_;
  Mode last_mode_ = Mode::Eval;
};

struct LossResult {
  double loss = 0.0;
  Eigen::MatrixXd grad;  // d(loss)/d(outputs)
};

LossResult compute_loss(LossKind kind, const Eigen::MatrixXd& outputs,
                        const Tensor& targets);

struct Dataset {
  Tensor inputs;   // [N, ...sample shape...]
  Tensor targets;  // [N] labels for CE, [N, ...] values for MSE
  std::int64_t size() const { return inputs.extent(0); }
};

struct TrainResult {
  std::vector<EpochStats> trace;
};

// Deterministic given (spec, data, config.seed): init, shuffling, dropout and
// augmentation all come from seed-derived streams.
TrainResult train(Model& model, const Dataset& data, const TrainConfig& config);

double accuracy(Model& model, const Dataset& data);

// Max relative error of analytic vs central-difference gradients.
double gradient_check(Model& model, const Tensor& batch, const Tensor& targets,
                      double eps = 1e-5, std::uint64_t seed = 1234);

// ParamState persistence: flat little-endian doubles + JSON sidecar with the
// layer layout.
void save_params(const Model& model, const std::string& path);
Eigen::VectorXd load_params(const std::string& path);

}  // namespace nn
}  // namespace symlab
