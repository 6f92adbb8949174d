#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace descentlab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntVector = Eigen::VectorXi;
using Index = Eigen::Index;

// Base class for all descentlab errors. Subclasses carry the failure kind in
// the type so tests and callers can catch them individually.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct BadMagic : Error {
  using Error::Error;
};
struct CountMismatch : Error {
  using Error::Error;
};
struct TruncatedFile : Error {
  using Error::Error;
};
struct NotEnoughRows : Error {
  using Error::Error;
};
struct DimensionMismatch : Error {
  using Error::Error;
};
struct SingularSystem : Error {
  using Error::Error;
};
struct Infeasible : Error {
  using Error::Error;
};
struct ShrinkNotAllowed : Error {
  using Error::Error;
};
struct NonFiniteValue : Error {
  using Error::Error;
};
struct EmptyInput : Error {
  using Error::Error;
};
struct SchemaMismatch : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};

// Mean squared error normalized by rows * outputs. Both matrices must have
// identical shape.
inline double mean_squared_error(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw DimensionMismatch("mean_squared_error: prediction " +
                            std::to_string(pred.rows()) + "x" +
                            std::to_string(pred.cols()) + " vs target " +
                            std::to_string(target.rows()) + "x" +
                            std::to_string(target.cols()));
  }
  if (pred.size() == 0) return 0.0;
  return (pred - target).squaredNorm() /
         static_cast<double>(pred.rows() * pred.cols());
}

// Row-wise argmax with ties broken toward the lowest column index.
inline Index argmax_row(const Matrix& m, Index row) {
  Index best = 0;
  for (Index j = 1; j < m.cols(); ++j) {
    if (m(row, j) > m(row, best)) best = j;
  }
  return best;
}

// Fraction of rows whose argmax prediction disagrees with the label.
inline double classification_error_rate(const Matrix& pred,
                                        const IntVector& labels) {
  if (pred.rows() != labels.size()) {
    throw DimensionMismatch("classification_error_rate: " +
                            std::to_string(pred.rows()) + " predictions vs " +
                            std::to_string(labels.size()) + " labels");
  }
  if (pred.rows() == 0) return 0.0;
  Index wrong = 0;
  for (Index i = 0; i < pred.rows(); ++i) {
    if (argmax_row(pred, i) != static_cast<Index>(labels[i])) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(pred.rows());
}

}  // namespace descentlab
