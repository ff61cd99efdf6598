#include "devdet/nn/params.hpp"

#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>

#include "devdet/error.hpp"
#include "devdet/hash.hpp"

namespace devdet::nn {

std::size_t ParamTable::add(std::string name, std::vector<int> shape) {
  const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                                        [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
  entries_.push_back(ParamEntry{std::move(name), std::move(shape), size_, n});
  size_ += n;
  return entries_.back().offset;
}

const ParamEntry& ParamTable::at(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e;
  throw ContractError("no parameter named " + std::string(name));
}

void round_to_float(std::span<double> values) {
  for (double& v : values) v = static_cast<double>(static_cast<float>(v));
}

bool float_representable(std::span<const double> values) {
  for (double v : values)
    if (static_cast<double>(static_cast<float>(v)) != v) return false;
  return true;
}

std::uint64_t hash_parameters(std::span<const double> values) {
  std::uint64_t h = kFnvOffset;
  for (double v : values) {
    const float f = static_cast<float>(v);
    std::byte bytes[sizeof f];
    std::memcpy(bytes, &f, sizeof f);
    h = fnv1a64(std::span<const std::byte>(bytes, sizeof f), h);
  }
  return h;
}

bool all_finite(std::span<const double> values) {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace devdet::nn
