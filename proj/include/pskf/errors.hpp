#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace pskf {

/// Operand shapes do not line up. `operand()` names the argument at fault.
class DimensionError : public std::invalid_argument {
 public:
  DimensionError(std::string operand, const std::string& detail);

  const std::string& operand() const noexcept { return operand_; }

 private:
  std::string operand_;
};

/// Numerical failure inside a filter. Estimators attach the frame index on the
/// way out so the message points at the offending time step.
class FilterError : public std::runtime_error {
 public:
  explicit FilterError(const std::string& detail);

  const char* what() const noexcept override { return message_.c_str(); }
  std::optional<long> frame() const noexcept { return frame_; }
  void set_frame(long frame);

 private:
  std::string detail_;
  std::string message_;
  std::optional<long> frame_;
};

/// Cholesky of an innovation (or other SPD) matrix failed even after jitter.
class SingularMatrixError : public FilterError {
 public:
  SingularMatrixError(const std::string& matrix_name, double condition_estimate);

  double condition_estimate() const noexcept { return condition_estimate_; }

 private:
  double condition_estimate_;
};

/// Every mode hypothesis has zero likelihood.
class DegenerateLikelihoodError : public FilterError {
 public:
  using FilterError::FilterError;
};

}  // namespace pskf
