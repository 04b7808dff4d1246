#ifndef CPLAB_ERRORS_HPP
#define CPLAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace cplab {

/// Bad parameters or configuration. Mapped to exit code 2 by the CLI.
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConfigError : public InvalidParameter {
 public:
  using InvalidParameter::InvalidParameter;
};

/// Any numerical procedure that could not deliver its contract. Exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class QuadratureError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NoConvergence : public NumericalError {
 public:
  NoConvergence(const std::string& what, double residual)
      : NumericalError(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class InsufficientHits : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class InsufficientOccupancy : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegeneratePosterior : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class UnidentifiableModel : public InvalidParameter {
 public:
  using InvalidParameter::InvalidParameter;
};

class OutOfParameterSpace : public InvalidParameter {
 public:
  using InvalidParameter::InvalidParameter;
};

namespace detail {
inline void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidParameter(what);
}
}  // namespace detail

}  // namespace cplab

#endif  // CPLAB_ERRORS_HPP
