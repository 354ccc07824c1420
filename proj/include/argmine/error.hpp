#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace argmine {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (JSON line, embedding row, model file).
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  explicit ParseError(const std::string& what) : Error(what) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_ = 0;
};

/// Well-formed input that breaks a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Operand shapes disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An operation produced NaN or infinity.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment or model configuration; `path` names the offending field.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Training produced a non-finite loss.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(std::size_t epoch, const std::string& what)
      : Error("training diverged at epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}

  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

/// A cross-validation fold failed; wraps the underlying message with the fold id.
class FoldError : public Error {
 public:
  FoldError(const std::string& fold, const std::string& what)
      : Error("fold '" + fold + "': " + what), fold_(fold) {}

  const std::string& fold() const noexcept { return fold_; }

 private:
  std::string fold_;
};

}  // namespace argmine
