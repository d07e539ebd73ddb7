#include "symlab/io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "symlab/errors.hpp"

namespace symlab {
namespace io {

namespace {

void write_doubles(const std::string& path, const double* data, std::int64_t n) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(data),
            static_cast<std::streamsize>(sizeof(double) * n));
}

std::vector<double> read_doubles(const std::string& path, std::int64_t n) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open: " + path);
  std::vector<double> data(static_cast<std::size_t>(n));
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(sizeof(double) * n));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(double) * n))
    throw FormatError("truncated tensor file: " + path);
  return data;
}

nlohmann::json read_sidecar(const std::string& path) {
  std::ifstream js(path + ".json");
  if (!js) throw FormatError("missing sidecar: " + path + ".json");
  nlohmann::json j;
  try {
    js >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad sidecar " + path + ".json: " + e.what());
  }
  return j;
}

}  // namespace

void save_tensor(const Tensor& t, const std::string& path) {
  write_doubles(path, t.data(), t.size());
  nlohmann::json sidecar;
  sidecar["format"] = "symlab-tensor-v1";
  sidecar["shape"] = t.shape();
  std::ofstream js(path + ".json");
  js << sidecar.dump(2) << "\n";
}

Tensor load_tensor(const std::string& path) {
  const nlohmann::json sidecar = read_sidecar(path);
  std::vector<std::int64_t> shape;
  try {
    shape = sidecar.at("shape").get<std::vector<std::int64_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad shape in sidecar " + path + ".json: " + e.what());
  }
  std::int64_t n = 1;
  for (auto e : shape) {
    if (e < 1) throw FormatError("bad extent in sidecar " + path + ".json");
    n *= e;
  }
  return Tensor(shape, read_doubles(path, n));
}

void save_matrix(const Eigen::MatrixXd& m, const std::string& path) {
  Tensor t({m.rows(), m.cols()});
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) t[i * m.cols() + j] = m(i, j);
  save_tensor(t, path);
}

Eigen::MatrixXd load_matrix(const std::string& path) {
  Tensor t = load_tensor(path);
  if (t.rank() != 2) throw FormatError("expected rank-2 tensor in " + path);
  Eigen::MatrixXd m(t.extent(0), t.extent(1));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = t[i * m.cols() + j];
  return m;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open for writing: " + path);
  out.precision(17);
  for (std::size_t i = 0; i < header.size(); ++i)
    out << (i ? "," : "") << header[i];
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
}

std::vector<std::vector<double>> read_csv(const std::string& path,
                                          std::vector<std::string>* header) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    if (first) {
      first = false;
      // Header row if any cell fails numeric parsing.
      std::vector<std::string> cells;
      std::stringstream hs(line);
      bool numeric = true;
      while (std::getline(hs, cell, ',')) {
        cells.push_back(cell);
        try {
          std::size_t pos = 0;
          std::stod(cell, &pos);
          if (pos != cell.size()) numeric = false;
        } catch (...) {
          numeric = false;
        }
      }
      if (!numeric) {
        if (header) *header = cells;
        continue;
      }
    }
    std::vector<double> row;
    std::stringstream rs(line);
    while (std::getline(rs, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (...) {
        throw FormatError("bad numeric cell '" + cell + "' in " + path);
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace io
}  // namespace symlab
