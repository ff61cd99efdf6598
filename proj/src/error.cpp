#include "devdet/error.hpp"

namespace devdet {
namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out = "invalid configuration";
  for (const auto& v : items) out += "\n  - " + v;
  return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : Error(join(violations)), violations_(std::move(violations)) {}

}  // namespace devdet
