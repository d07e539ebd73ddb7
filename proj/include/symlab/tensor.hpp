#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace symlab {

// Dense row-major 64-bit float tensor. Small and value-semantic; heavy math
// happens on Eigen maps over the flat storage.
class Tensor {
public:
  Tensor() = default;

  explicit Tensor(std::vector<std::int64_t> shape, double fill = 0.0)
      : shape_(std::move(shape)) {
    std::int64_t n = 1;
    for (auto e : shape_) {
      if (e < 1) throw std::invalid_argument("Tensor: extent must be >= 1");
      n *= e;
    }
    data_.assign(static_cast<std::size_t>(n), fill);
  }

  Tensor(std::vector<std::int64_t> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    std::int64_t n = 1;
    for (auto e : shape_) {
      if (e < 1) throw std::invalid_argument("Tensor: extent must be >= 1");
      n *= e;
    }
    if (n != static_cast<std::int64_t>(data_.size()))
      throw std::invalid_argument("Tensor: shape/data size mismatch");
  }

  const std::vector<std::int64_t>& shape() const { return shape_; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  std::int64_t rank() const { return static_cast<std::int64_t>(shape_.size()); }
  std::int64_t extent(std::size_t d) const { return shape_.at(d); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  // H x W x C indexing (the common image layout in this project).
  double& at3(std::int64_t i, std::int64_t j, std::int64_t c) {
    return data_[static_cast<std::size_t>((i * shape_[1] + j) * shape_[2] + c)];
  }
  double at3(std::int64_t i, std::int64_t j, std::int64_t c) const {
    return data_[static_cast<std::size_t>((i * shape_[1] + j) * shape_[2] + c)];
  }

  Eigen::Map<Eigen::VectorXd> vec() {
    return Eigen::Map<Eigen::VectorXd>(data_.data(), static_cast<Eigen::Index>(data_.size()));
  }
  Eigen::Map<const Eigen::VectorXd> vec() const {
    return Eigen::Map<const Eigen::VectorXd>(data_.data(), static_cast<Eigen::Index>(data_.size()));
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

private:
  std::vector<std::int64_t> shape_;
  std::vector<double> data_;
};

inline std::string shape_string(const std::vector<std::int64_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace symlab
