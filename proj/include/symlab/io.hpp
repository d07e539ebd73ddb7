#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "symlab/tensor.hpp"

namespace symlab {
namespace io {

// Flat binary tensor: row-major little-endian 64-bit floats, with a JSON
// sidecar at <path>.json holding the shape.
void save_tensor(const Tensor& t, const std::string& path);
Tensor load_tensor(const std::string& path);

void save_matrix(const Eigen::MatrixXd& m, const std::string& path);
Eigen::MatrixXd load_matrix(const std::string& path);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

std::vector<std::vector<double>> read_csv(const std::string& path,
                                          std::vector<std::string>* header = nullptr);

}  // namespace io
}  // namespace symlab
