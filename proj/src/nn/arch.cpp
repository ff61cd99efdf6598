#include "devdet/nn/arch.hpp"

#include <sstream>
#include <stdexcept>

#include "devdet/error.hpp"

namespace devdet::nn {

const std::vector<int>& ArchSpec::field(char key, std::size_t count) const {
  for (const auto& [k, v] : fields) {
    if (k != key) continue;
    if (v.empty() || (count != 0 && v.size() != count)) throw ConfigError("malformed architecture id '" + id + "'");
    return v;
  }
  throw ConfigError("architecture '" + id + "' lacks field '" + std::string(1, key) + "'");
}

ArchSpec parse_arch(const std::string& id) {
  ArchSpec spec;
  spec.id = id;
  std::istringstream in(id);
  std::string token;
  std::getline(in, spec.family, '-');
  while (std::getline(in, token, '-')) {
    if (token.size() < 2) throw ConfigError("malformed architecture id '" + id + "'");
    std::vector<int> values;
    std::istringstream vs(token.substr(1));
    std::string v;
    while (std::getline(vs, v, '.')) {
      try {
        std::size_t pos = 0;
        const int n = std::stoi(v, &pos);
        if (pos != v.size() || n <= 0) throw std::invalid_argument(v);
        values.push_back(n);
      } catch (const std::exception&) {
        throw ConfigError("malformed architecture id '" + id + "'");
      }
    }
    spec.fields.emplace_back(token[0], std::move(values));
  }
  return spec;
}

std::string join_dots(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "." : "") + std::to_string(v[i]);
  return s;
}

}  // namespace devdet::nn
