#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace devdet {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;

std::uint64_t fnv1a64(std::span<const std::byte> bytes, std::uint64_t h = kFnvOffset);
std::uint64_t fnv1a64(std::string_view text, std::uint64_t h = kFnvOffset);

// 16 lowercase hex digits.
std::string hex64(std::uint64_t v);

// Hash of a whole file's bytes; throws IoError if unreadable.
std::uint64_t hash_file(const std::string& path);

}  // namespace devdet
