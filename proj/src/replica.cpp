#include "symlab/replica.hpp"

#include <algorithm>
#include <atomic>
#include <stdexcept>
#include <thread>

#include "symlab/datasets.hpp"
#include "symlab/errors.hpp"

namespace symlab {
namespace replica {

std::string arch_name(ArchitectureId arch) {
  switch (arch) {
    case ArchitectureId::SimpleCnn: return "simple_cnn";
    case ArchitectureId::DropoutCnn: return "dropout_cnn";
    case ArchitectureId::BatchnormCnn: return "batchnorm_cnn";
    case ArchitectureId::FlipEquivarianceCnn: return "flip_equivariance_cnn";
    case ArchitectureId::RotationEquivarianceCnn: return "rotation_equivariance_cnn";
  }
  return "unknown";
}

ArchitectureId arch_from_name(const std::string& name) {
  for (auto a : {ArchitectureId::SimpleCnn, ArchitectureId::DropoutCnn,
                 ArchitectureId::BatchnormCnn, ArchitectureId::FlipEquivarianceCnn,
                 ArchitectureId::RotationEquivarianceCnn})
    if (arch_name(a) == name) return a;
  throw std::invalid_argument("unknown architecture: " + name);
}

std::string DataSpec::id() const {
  if (kind == Kind::Bars) return "bars(" + std::to_string(count) + ")";
  return "cifar10_subset(" + path + "," + std::to_string(count) + ")";
}

ReplicaRunSpec ReplicaRunSpec::desk(ArchitectureId arch, std::uint64_t base_seed) {
  ReplicaRunSpec s;
  s.arch = arch;
  s.dataset = DataSpec::bars(100);
  for (int r = 0; r < 20; ++r) s.seeds.push_back(base_seed + static_cast<std::uint64_t>(r));
  s.train.optimizer = nn::TrainConfig::Optimizer::Adam;
  s.train.lr = 1e-3;
  s.train.epochs = 50;
  s.train.batch_size = 16;
  return s;
}

ReplicaRunSpec ReplicaRunSpec::full(ArchitectureId arch, std::uint64_t base_seed) {
  ReplicaRunSpec s = desk(arch, base_seed);
  s.seeds.clear();
  for (int r = 0; r < 200; ++r) s.seeds.push_back(base_seed + static_cast<std::uint64_t>(r));
  s.train.epochs = 200;
  return s;
}

nn::NetworkSpec build_network(ArchitectureId arch,
                              const std::vector<std::int64_t>& input_shape,
                              int num_classes) {
  if (input_shape.size() != 3)
    throw std::invalid_argument("build_network: expected H x W x C input shape");
  std::int64_t h = input_shape[0];
  const int in_channels = static_cast<int>(input_shape[2]);
  const bool batchnorm = arch == ArchitectureId::BatchnormCnn;

  nn::NetworkSpec spec;
  spec.input_shape = input_shape;
  spec.loss = nn::LossKind::SoftmaxCrossEntropy;
  if (arch == ArchitectureId::FlipEquivarianceCnn)
    spec.augment = nn::AugmentKind::RandomHFlip;
  else if (arch == ArchitectureId::RotationEquivarianceCnn)
    spec.augment = nn::AugmentKind::RandomRot180;

  auto& L = spec.layers;
  L.push_back(nn::LayerSpec::conv2d(in_channels, 8, 3));
  h -= 2;
  if (batchnorm) L.push_back(nn::LayerSpec::batchnorm2d(8));
  L.push_back(nn::LayerSpec::relu());
  L.push_back(nn::LayerSpec::maxpool2());
  h /= 2;
  L.push_back(nn::LayerSpec::conv2d(8, 16, 3));
  h -= 2;
  if (batchnorm) L.push_back(nn::LayerSpec::batchnorm2d(16));
  L.push_back(nn::LayerSpec::relu());
  if (h >= 2) {  // small inputs (8x8 bars) reach 1x1 here; pooling stops
    L.push_back(nn::LayerSpec::maxpool2());
    h /= 2;
  }
  L.push_back(nn::LayerSpec::flatten());
  L.push_back(nn::LayerSpec::dense(static_cast<int>(h * h * 16), 32));
  L.push_back(nn::LayerSpec::relu());
  if (arch == ArchitectureId::DropoutCnn)
    L.push_back(nn::LayerSpec::dropout(0.3));
  L.push_back(nn::LayerSpec::dense(32, num_classes));
  return spec;
}

nn::Dataset build_dataset(const DataSpec& data, std::uint64_t seed) {
  datasets::LabeledImageSet set;
  if (data.kind == DataSpec::Kind::Bars) {
    Prng prng(seed);
    set = datasets::gen_bars_dataset(data.count, prng);
  } else {
    set = datasets::subset(datasets::load_cifar10(data.path), seed, data.count);
  }
  if (set.images.empty()) throw std::invalid_argument("build_dataset: empty set");

  const auto& shape = set.images[0].shape();
  const std::int64_t n = static_cast<std::int64_t>(set.images.size());
  nn::Dataset out;
  out.inputs = Tensor({n, shape[0], shape[1], shape[2]});
  out.targets = Tensor({n});
  const std::int64_t per = set.images[0].size();
  for (std::int64_t i = 0; i < n; ++i) {
    std::copy(set.images[static_cast<std::size_t>(i)].data(),
              set.images[static_cast<std::size_t>(i)].data() + per,
              out.inputs.data() + i * per);
    out.targets[i] = static_cast<double>(set.labels[static_cast<std::size_t>(i)]);
  }
  return out;
}

TrainedReplicas train_replicas(const ReplicaRunSpec& spec, int workers) {
  if (spec.seeds.size() < 2)
    throw std::invalid_argument("train_replicas: need at least 2 replicas");

  const nn::Dataset data = build_dataset(spec.dataset);
  // held-out draw for the accuracy side-table
  const nn::Dataset eval_data = build_dataset(spec.dataset, 9001);
  const std::vector<std::int64_t> sample_shape(data.inputs.shape().begin() + 1,
                                               data.inputs.shape().end());
  const int num_classes = spec.dataset.kind == DataSpec::Kind::Bars ? 2 : 10;
  const nn::NetworkSpec net = build_network(spec.arch, sample_shape, num_classes);

  const int r_total = static_cast<int>(spec.seeds.size());
  std::vector<Eigen::VectorXd> rows(static_cast<std::size_t>(r_total));
  std::vector<double> accs(static_cast<std::size_t>(r_total), 0.0);
  std::vector<std::string> errors(static_cast<std::size_t>(r_total));
  std::atomic<int> next{0};

  auto worker = [&]() {
    for (;;) {
      const int r = next.fetch_add(1);
      if (r >= r_total) break;
      nn::TrainConfig cfg = spec.train;
      cfg.seed = spec.seeds[static_cast<std::size_t>(r)];
      try {
        nn::Model model(net);
        nn::train(model, data, cfg);
        rows[static_cast<std::size_t>(r)] = model.params();
        accs[static_cast<std::size_t>(r)] = nn::accuracy(model, eval_data);
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(r)] = e.what();
      }
    }
  };

  workers = std::max(1, workers);
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  TrainedReplicas out;
  double acc_sum = 0.0;
  std::vector<Eigen::VectorXd> ok;
  for (int r = 0; r < r_total; ++r) {
    if (!errors[static_cast<std::size_t>(r)].empty()) {
      out.failures.push_back({spec.seeds[static_cast<std::size_t>(r)],
                              errors[static_cast<std::size_t>(r)]});
      continue;
    }
    ok.push_back(std::move(rows[static_cast<std::size_t>(r)]));
    out.seeds.push_back(spec.seeds[static_cast<std::size_t>(r)]);
    acc_sum += accs[static_cast<std::size_t>(r)];
  }
  if (ok.size() < 2)
    throw NumericalError("train_replicas: fewer than 2 replicas converged");
  out.weights.resize(static_cast<Eigen::Index>(ok.size()), ok[0].size());
  for (std::size_t r = 0; r < ok.size(); ++r)
    out.weights.row(static_cast<Eigen::Index>(r)) = ok[r].transpose();
  out.mean_accuracy = acc_sum / static_cast<double>(ok.size());
  return out;
}

SymmetryReport symmetry_metric(const Eigen::MatrixXd& weights, int d, int bins,
                               double sigma_bins) {
  const Eigen::Index r = weights.rows();
  if (r < 2) throw std::invalid_argument("symmetry_metric: need R >= 2 rows");

  const Eigen::MatrixXd reduced = pca_reduce(weights, d);
  const int dim = static_cast<int>(reduced.cols());

  SymmetryReport report;
  report.distances.reserve(static_cast<std::size_t>(r * (r - 1) / 2));
  std::vector<double> a(static_cast<std::size_t>(dim)), b(a);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = i + 1; j < r; ++j) {
      for (int k = 0; k < dim; ++k) {
        a[static_cast<std::size_t>(k)] = reduced(i, k);
        b[static_cast<std::size_t>(k)] = reduced(j, k);
      }
      report.distances.push_back(wasserstein_1d(a, b));
    }
  report.curve = smoothed_histogram(report.distances, bins, sigma_bins);
  const DensitySummary summary = density_summary(report.curve, report.distances);
  report.metric_mean = summary.mean;
  report.metric_peak = summary.peak;
  return report;
}

std::vector<SymmetryReport> compare_architectures(
    const std::vector<ReplicaRunSpec>& specs, int workers) {
  if (specs.size() < 2)
    throw std::invalid_argument("compare_architectures: need at least 2 specs");
  for (const auto& s : specs)
    if (s.dataset.id() != specs[0].dataset.id() ||
        s.train.epochs != specs[0].train.epochs ||
        s.train.lr != specs[0].train.lr)
      throw std::invalid_argument(
          "compare_architectures: specs must share dataset and train settings");

  std::vector<SymmetryReport> reports;
  for (const auto& s : specs) {
    TrainedReplicas trained = train_replicas(s, workers);
    SymmetryReport rep =
        symmetry_metric(trained.weights, s.reduce_dim, s.bins, s.sigma_bins);
    rep.arch = arch_name(s.arch);
    reports.push_back(std::move(rep));
  }
  std::stable_sort(reports.begin(), reports.end(),
                   [](const SymmetryReport& x, const SymmetryReport& y) {
                     return x.metric_mean > y.metric_mean;
                   });
  return reports;
}

}  // namespace replica
}  // namespace symlab
