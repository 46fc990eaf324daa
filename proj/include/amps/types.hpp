#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace amps {

using index_t = std::int64_t;

/// Column-major dense storage used for E, W, S2 and element matrices.
using DenseMatrix = Eigen::MatrixXd;
using Vector = std::vector<double>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a factorization hits a pivot below tolerance.
class SingularMatrixError : public std::runtime_error {
 public:
  SingularMatrixError(const std::string& what, index_t pivot)
      : std::runtime_error(what), pivot_(pivot) {}
  /// Pivot index in the original (unpermuted) numbering.
  index_t pivot() const noexcept { return pivot_; }

 private:
  index_t pivot_;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace amps
