#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace devdet::nn {

struct ParamEntry {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
  friend bool operator==(const ParamEntry&, const ParamEntry&) = default;
};

// Named slices of one flat parameter vector.
class ParamTable {
 public:
  std::size_t add(std::string name, std::vector<int> shape);
  const std::vector<ParamEntry>& entries() const { return entries_; }
  std::size_t size() const { return size_; }
  const ParamEntry& at(std::string_view name) const;
  friend bool operator==(const ParamTable&, const ParamTable&) = default;

 private:
  std::vector<ParamEntry> entries_;
  std::size_t size_ = 0;
};

// Rounds every value to the nearest float32 so checkpoints round-trip exactly.
void round_to_float(std::span<double> values);
bool float_representable(std::span<const double> values);

// Hash of the float32 images of `values`.
std::uint64_t hash_parameters(std::span<const double> values);

bool all_finite(std::span<const double> values);

}  // namespace devdet::nn
