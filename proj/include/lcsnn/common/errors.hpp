#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lcsnn {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
  using Error::Error;
};

class UnsupportedFormat : public Error {
public:
  using Error::Error;
};

class EmptyInput : public Error {
public:
  using Error::Error;
};

class ShapeError : public Error {
public:
  using Error::Error;
};

class NumericalError : public Error {
public:
  using Error::Error;
};

class DivisionError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

/// A class had fewer windows than the balancing step asked for.
class InsufficientData : public Error {
public:
  InsufficientData(std::string class_name, std::size_t available,
                   std::size_t requested)
      : Error("insufficient data for class " + class_name + ": " +
              std::to_string(available) + " available, " +
              std::to_string(requested) + " requested"),
        class_name_(std::move(class_name)), available_(available) {}

  const std::string &class_name() const noexcept { return class_name_; }
  std::size_t available() const noexcept { return available_; }

private:
  std::string class_name_;
  std::size_t available_;
};

} // namespace lcsnn
