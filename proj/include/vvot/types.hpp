#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <stdexcept>
#include <string>

namespace vvot {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

enum class ErrorCode {
  DisconnectedGraph,
  NonpositiveWeight,
  SelfLoop,
  DuplicateEdge,
  DimensionMismatch,
  StepTooLarge,
  EmptyShape,
  ChannelCountMismatch,
  MarginalMismatch,
  BadGamma,
  BadTimeGrid,
  InfeasibleBoundary,
  NonconvergentRootFind,
  CGStall,
  MassMismatch,
  Infeasible,
  ScaleExceeded,
  NonpositiveEntry,
  StepUnderflow,
  UnsupportedFormat,
  ZeroImage,
  IOFailure,
};

/// Library-wide exception carrying a machine-checkable error code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& message) {
  if (!cond) throw Error(code, message);
}

}  // namespace vvot
