#include "pskf/errors.hpp"

#include <sstream>

namespace pskf {

DimensionError::DimensionError(std::string operand, const std::string& detail)
    : std::invalid_argument("dimension mismatch in '" + operand + "': " + detail),
      operand_(std::move(operand)) {}

FilterError::FilterError(const std::string& detail)
    : std::runtime_error(detail), detail_(detail), message_(detail) {}

void FilterError::set_frame(long frame) {
  frame_ = frame;
  message_ = "frame " + std::to_string(frame) + ": " + detail_;
}

namespace {
std::string singular_message(const std::string& name, double cond) {
  std::ostringstream os;
  os << name << " is numerically singular (condition estimate " << cond << ")";
  return os.str();
}
}  // namespace

SingularMatrixError::SingularMatrixError(const std::string& matrix_name,
                                         double condition_estimate)
    : FilterError(singular_message(matrix_name, condition_estimate)),
      condition_estimate_(condition_estimate) {}

}  // namespace pskf
