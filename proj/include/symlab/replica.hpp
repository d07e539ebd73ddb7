#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "symlab/nn.hpp"
#include "symlab/stats.hpp"

namespace symlab {
namespace replica {

enum class ArchitectureId {
  SimpleCnn,
  DropoutCnn,
  BatchnormCnn,
  FlipEquivarianceCnn,
  RotationEquivarianceCnn,
};

std::string arch_name(ArchitectureId arch);
ArchitectureId arch_from_name(const std::string& name);

struct DataSpec {
  enum class Kind { Bars, Cifar10Subset } kind = Kind::Bars;
  int count = 100;
  std::string path;  // CIFAR batch file

  static DataSpec bars(int n) { return {Kind::Bars, n, {}}; }
  static DataSpec cifar10_subset(std::string path, int count) {
    return {Kind::Cifar10Subset, count, std::move(path)};
  }
  std::string id() const;
};

struct ReplicaRunSpec {
  ArchitectureId arch = ArchitectureId::SimpleCnn;
  DataSpec dataset = DataSpec::bars(100);
  std::vector<std::uint64_t> seeds;  // one per replica, distinct
  nn::TrainConfig train;             // seed field is overridden per replica
  int reduce_dim = 100;
  int bins = 50;
  double sigma_bins = 2.0;

  // R=20, epochs=50 on bars(100); minutes-scale.
  static ReplicaRunSpec desk(ArchitectureId arch, std::uint64_t base_seed = 1);
  // R=200, epochs=200.
  static ReplicaRunSpec full(ArchitectureId arch, std::uint64_t base_seed = 1);
};

struct SymmetryReport {
  std::string arch;
  std::vector<double> distances;  // R(R-1)/2, pair order (r, s), r < s
  DensityCurve curve;
  double metric_mean = 0.0;
  double metric_peak = 0.0;
};

struct ReplicaFailure {
  std::uint64_t seed = 0;
  std::string message;
};

struct TrainedReplicas {
  Eigen::MatrixXd weights;  // R x D, row r = flattened final params of seeds[r]
  std::vector<std::uint64_t> seeds;
  std::vector<ReplicaFailure> failures;  // diverged replicas, excluded from rows
  double mean_accuracy = 0.0;            // over surviving replicas
};

// Network layout for one architecture on the given input shape; equivariance
// variants carry their forward-pass augmentation inside the spec.
nn::NetworkSpec build_network(ArchitectureId arch,
                              const std::vector<std::int64_t>& input_shape,
                              int num_classes);

nn::Dataset build_dataset(const DataSpec& data, std::uint64_t seed = 9000);

TrainedReplicas train_replicas(const ReplicaRunSpec& spec, int workers = 1);

SymmetryReport symmetry_metric(const Eigen::MatrixXd& weights, int d, int bins,
                               double sigma_bins);

// Reports sorted by metric_mean descending; specs must share dataset + train
// settings.
std::vector<SymmetryReport> compare_architectures(
    const std::vector<ReplicaRunSpec>& specs, int workers = 1);

}  // namespace replica
}  // namespace symlab
