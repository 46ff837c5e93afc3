#pragma once

#include <stdexcept>
#include <string>

namespace latent_evo {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration problems map to CLI exit code 1; everything else to 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class BadConfig : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class SizeMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidValue : public Error {
 public:
  using Error::Error;
};

class SingularInput : public Error {
 public:
  SingularInput(std::size_t column, const std::string& what)
      : Error(what), column_(column) {}

  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t column_;
};

class NotEvaluated : public Error {
 public:
  using Error::Error;
};

class OddPopulation : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class GeneratorError : public Error {
 public:
  using Error::Error;
};

class ChildFailed : public GeneratorError {
 public:
  ChildFailed(int exit_code, const std::string& what)
      : GeneratorError(what), exit_code_(exit_code) {}

  int exit_code() const noexcept { return exit_code_; }

 private:
  int exit_code_;
};

class Timeout : public GeneratorError {
 public:
  using GeneratorError::GeneratorError;
};

class MalformedOutput : public GeneratorError {
 public:
  using GeneratorError::GeneratorError;
};

class EncodeFailed : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class HeterogeneousReward : public Error {
 public:
  using Error::Error;
};

class NotPopulationAlgorithm : public Error {
 public:
  using Error::Error;
};

}  // namespace latent_evo
