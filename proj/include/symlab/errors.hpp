#pragma once

#include <stdexcept>
#include <string>

namespace symlab {

// Malformed input files (wrong record size, bad sidecar, ...).
class FormatError : public std::runtime_error {
public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values reaching a numerical kernel.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Training produced a non-finite loss.
class TrainingDiverged : public std::runtime_error {
public:
  TrainingDiverged(const std::string& what, int epoch)
      : std::runtime_error(what), epoch(epoch) {}
  int epoch;
};

}  // namespace symlab
