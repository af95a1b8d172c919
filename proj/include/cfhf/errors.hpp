#pragma once

#include <stdexcept>
#include <string>

namespace cfhf {

// Base for every error raised by the library. The CLI maps each subclass to a
// distinct exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad quantum numbers, dimensions or parameter values.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed configuration or dataset text.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, int line, const std::string& what)
      : Error(source + (line > 0 ? ":" + std::to_string(line) : std::string{}) +
              ": " + what),
        line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_ = 0;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Eigenstates that do not respect the assumed site symmetry, or labels that
// cannot be assigned unambiguously.
class SymmetryError : public Error {
 public:
  using Error::Error;
};

// Perturbation theory hit a vanishing energy denominator.
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

// Optimizer failures: iteration cap, singular normal matrix.
class FitError : public Error {
 public:
  using Error::Error;
};

}  // namespace cfhf
