#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace flowgrpo {

// Base of every error the library throws. The CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Array extents disagree with what an operation expects.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// An argument lies outside the domain of an operation (sigma <= 0, empty mask, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// A caller broke a usage contract (stale tape, wrong checkpoint phase, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf showed up where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents; byte_offset points at the first offending byte.
class ParseError : public IoError {
 public:
  ParseError(const std::string& what, std::size_t byte_offset)
      : IoError(what + " (at byte " + std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}

  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

}  // namespace flowgrpo
