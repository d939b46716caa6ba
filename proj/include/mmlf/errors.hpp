#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mmlf {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Vector/matrix sizes do not agree (class counts, parameter shapes, ...).
class DimensionError : public Error {
public:
  using Error::Error;
};

// Evidence entries are negative or non-finite.
class InvalidEvidenceError : public Error {
public:
  using Error::Error;
};

// Dempster combination with conflict C >= 1 - eps: the normalizer vanishes.
class TotalConflictError : public Error {
public:
  using Error::Error;
};

// Opinion with zero uncertainty cannot be mapped back to evidence.
class DegenerateOpinionError : public Error {
public:
  using Error::Error;
};

// Dirichlet parameters below 1, NaN targets, and similar bad loss inputs.
class InvalidParameterError : public Error {
public:
  using Error::Error;
};

// Non-finite score-network input.
class InvalidFeatureError : public Error {
public:
  using Error::Error;
};

// Singular or otherwise unusable sensor calibration.
class CalibrationError : public Error {
public:
  using Error::Error;
};

// Malformed input text. `line` is 1-based; 0 means "not line specific".
class ParseError : public Error {
public:
  ParseError(std::size_t line, const std::string& msg)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg),
        line_(line) {}

  std::size_t line() const { return line_; }

private:
  std::size_t line_ = 0;
};

// Unknown key or out-of-range value in a run configuration.
class ConfigError : public Error {
public:
  ConfigError(std::string key, const std::string& msg)
      : Error("config key '" + key + "': " + msg), key_(std::move(key)) {}

  const std::string& key() const { return key_; }

private:
  std::string key_;
};

}  // namespace mmlf
