#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace texturesmith {

enum class ErrorKind { Config, Shape, Format, Io, Numerical };

/// Base of every exception thrown by the library. `kind()` drives the CLI
/// exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Tensor or layer shapes that do not chain. Carries the offending layer
/// position when raised from a network sweep.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what, std::optional<std::size_t> layer = std::nullopt)
      : Error(ErrorKind::Shape, layer ? "layer " + std::to_string(*layer) + ": " + what : what),
        layer_(layer) {}
  std::optional<std::size_t> layer() const noexcept { return layer_; }

 private:
  std::optional<std::size_t> layer_;
};

enum class FormatErrc {
  BadMagic,
  UnsupportedVersion,
  Truncated,
  SizeMismatch,
  ChannelMismatch,
  InvalidValue,
};

/// Malformed binary input (weights, descriptor, unary or image files).
class FormatError : public Error {
 public:
  FormatError(FormatErrc code, const std::string& what) : Error(ErrorKind::Format, what), code_(code) {}
  FormatErrc code() const noexcept { return code_; }

 private:
  FormatErrc code_;
};

enum class ConfigErrc { Syntax, UnknownKey, MissingKey, TypeMismatch, Conflict, InvalidValue };

class ConfigError : public Error {
 public:
  ConfigError(ConfigErrc code, const std::string& what, std::size_t line = 0)
      : Error(ErrorKind::Config, line ? "line " + std::to_string(line) + ": " + what : what),
        code_(code),
        line_(line) {}
  ConfigErrc code() const noexcept { return code_; }
  /// 1-based; 0 when the error is not tied to a line.
  std::size_t line() const noexcept { return line_; }

 private:
  ConfigErrc code_;
  std::size_t line_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

}  // namespace texturesmith
