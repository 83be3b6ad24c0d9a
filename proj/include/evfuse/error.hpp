#pragma once

#include <stdexcept>
#include <string>

namespace evfuse {

// Base of every error thrown by the library. The CLI maps the concrete
// type onto its exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad argument, shape mismatch, or violated precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Argument outside a function's mathematical domain (e.g. digamma(0)).
class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Numeric failure at run time: divergence, non-finite values.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A fusion operator hit its singular case (total conflict for BCF, two
// dogmatic operands for CBF). `stage` names the failing step of a chain.
class FusionError : public NumericError {
 public:
  FusionError(const std::string& what, std::string stage = {})
      : NumericError(stage.empty() ? what : stage + ": " + what),
        stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

// BCF normalisation factor C vanished: the operands are in total conflict.
class ConflictError : public FusionError {
 public:
  using FusionError::FusionError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. `line` is 1-based, 0 when not applicable.
class ParseError : public IoError {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : IoError(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace evfuse
