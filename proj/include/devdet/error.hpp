#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace devdet {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration; carries every violation found, not just the first.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  explicit ConfigError(const std::string& violation) : ConfigError(std::vector<std::string>{violation}) {}
  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  std::vector<std::string> violations_;
};

// A pipeline artifact a command depends on is absent or does not match the chain.
class MissingArtifact : public Error {
 public:
  using Error::Error;
};

// NaN/inf during optimization or divergence of an iterative solver.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed manifest record, score table line or checkpoint header.
class LoadError : public Error {
 public:
  using Error::Error;
};

// Violated operation precondition (shape mismatch, empty class, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace devdet
