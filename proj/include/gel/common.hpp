#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gel {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

enum class ErrorCode {
  DimensionMismatch,
  EmptyInput,
  NonFinite,
  InvalidArgument,
  MissingLabels,
  SingularHessian,
  Io,
  Parse,
};

/// Single exception type for the library; `code()` distinguishes the failure.
class GelError : public std::runtime_error {
 public:
  GelError(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

// Weights at or below this are reported as exact zeros.
inline constexpr double kZeroWeight = 1e-14;

}  // namespace gel
