#pragma once
// Architecture ids look like "convnet-s64-c8.16.32.32-h32": a family name
// followed by dash-separated fields, each a key letter and dot-joined
// positive integers.
#include <string>
#include <utility>
#include <vector>

namespace devdet::nn {

struct ArchSpec {
  std::string id;
  std::string family;
  std::vector<std::pair<char, std::vector<int>>> fields;

  // Throws ConfigError when the field is missing or does not hold `count` values (0 = any, nonempty).
  const std::vector<int>& field(char key, std::size_t count = 0) const;
};

ArchSpec parse_arch(const std::string& id);
std::string join_dots(const std::vector<int>& values);

}  // namespace devdet::nn
