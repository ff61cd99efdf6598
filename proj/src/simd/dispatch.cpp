#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "devdet/simd/kernels.hpp"

namespace devdet::simd {
namespace {

bool cpu_has_avx2() {
#if defined(DEVDET_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() {
  if (const char* forced = std::getenv("DEVDET_SIMD"); forced != nullptr && *forced != '\0') {
    const Isa isa = parse_isa(forced);
    if (available(isa)) return isa;
  }
  if (available(Isa::avx2)) return Isa::avx2;
  if (available(Isa::neon)) return Isa::neon;
  return Isa::scalar;
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> t{&table(detect())};
  return t;
}

}  // namespace

bool available(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
      return cpu_has_avx2();
    case Isa::neon:
#if defined(DEVDET_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Isa isa) {
  if (!available(isa)) throw std::invalid_argument("SIMD variant not available: " + std::string(name(isa)));
  switch (isa) {
#if defined(DEVDET_HAVE_AVX2)
    case Isa::avx2:
      return detail::avx2_table;
#endif
#if defined(DEVDET_HAVE_NEON)
    case Isa::neon:
      return detail::neon_table;
#endif
    default:
      return detail::scalar_table;
  }
}

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

void select(Isa isa) { current().store(&table(isa), std::memory_order_relaxed); }

std::string_view name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
    case Isa::neon:
      return "neon";
  }
  return "?";
}

Isa parse_isa(std::string_view text) {
  if (text == "scalar") return Isa::scalar;
  if (text == "avx2") return Isa::avx2;
  if (text == "neon") return Isa::neon;
  throw std::invalid_argument("unknown SIMD variant: " + std::string(text));
}

}  // namespace devdet::simd
