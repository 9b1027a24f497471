// Shared aliases and error types for the dyadnet library.
#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace dyadnet {

inline constexpr const char* kVersion = "0.1.0";

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Input/validation problems (bad files, bad schemas, bad sizes). CLI exit 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failures (non-convergence, singular systems). CLI exit 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dyadnet
