#pragma once

// Data-parallel inner loops used by the network layers, the dictionary
// solver and the benchmark statistics. Every kernel has a scalar reference
// implementation; vector variants are picked once at startup from what the
// CPU reports and can be pinned with DEVDET_SIMD=scalar|avx2|neon.

#include <cstddef>
#include <string_view>

namespace devdet::simd {

enum class Isa { scalar, avx2, neon };

struct KernelTable {
  Isa isa;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // sum_i (a[i] - b[i])^2
  double (*sq_dist)(const double* a, const double* b, std::size_t n);
};

// Compiled into the binary and supported by the running CPU.
bool available(Isa isa);

// Table for a specific ISA; throws std::invalid_argument if unavailable.
const KernelTable& table(Isa isa);

// Table selected for this process.
const KernelTable& active();

// Overrides the process-wide selection (tests and benchmarks).
void select(Isa isa);

std::string_view name(Isa isa);
Isa parse_isa(std::string_view text);

inline double dot(const double* a, const double* b, std::size_t n) { return active().dot(a, b, n); }
inline void axpy(double alpha, const double* x, double* y, std::size_t n) { active().axpy(alpha, x, y, n); }
inline double sq_dist(const double* a, const double* b, std::size_t n) { return active().sq_dist(a, b, n); }

namespace detail {
extern const KernelTable scalar_table;
#if defined(DEVDET_HAVE_AVX2)
extern const KernelTable avx2_table;
#endif
#if defined(DEVDET_HAVE_NEON)
extern const KernelTable neon_table;
#endif
}  // namespace detail

}  // namespace devdet::simd
