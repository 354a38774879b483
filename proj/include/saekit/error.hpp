#ifndef SAEKIT_ERROR_HPP
#define SAEKIT_ERROR_HPP

#include <stdexcept>
#include <string>

namespace saekit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed user input: bad files, schema violations, inconsistent configs.
/// The CLI maps these to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Input that parses but fails a file-level check, carrying the offending line.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : ValidationError(source + ":" + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// An area with no survey units was asked for an estimate.
class NoDataError : public Error {
 public:
  using Error::Error;
};

/// Design-based variance cannot be formed (fewer than two sampled clusters).
class InestimableVarianceError : public Error {
 public:
  using Error::Error;
};

/// A function was evaluated outside its mathematical domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The sampler could not start or produced unusable output.
class SamplerError : public Error {
 public:
  using Error::Error;
};

}  // namespace saekit

#endif  // SAEKIT_ERROR_HPP
