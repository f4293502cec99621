#pragma once

#include <stdexcept>
#include <string>

namespace gst {

/// Base class for numerical failures raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A drift matrix that was required to be Hurwitz is not.
class UnstableError : public Error {
 public:
  UnstableError(const std::string& what, double abscissa)
      : Error(what), abscissa_(abscissa) {}
  double abscissa() const { return abscissa_; }

 private:
  double abscissa_;
};

/// An iterative solver stopped before meeting its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class SingularMatrixError : public Error {
 public:
  using Error::Error;
};

}  // namespace gst
