#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "devdet/detector.hpp"
#include "devdet/rng.hpp"
#include "devdet/simd/kernels.hpp"

using namespace devdet;

namespace {

std::vector<double> random_vector(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-2.0, 2.0);
  return v;
}

// Summation order differs between variants; bound the difference by the
// magnitude of the terms rather than of the result.
double abs_dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] * b[i]);
  return s;
}

std::vector<simd::Isa> vector_isas() {
  std::vector<simd::Isa> out;
  for (auto isa : {simd::Isa::avx2, simd::Isa::neon})
    if (simd::available(isa)) out.push_back(isa);
  return out;
}

}  // namespace

TEST_CASE("scalar table is always available") {
  CHECK(simd::available(simd::Isa::scalar));
  CHECK(simd::table(simd::Isa::scalar).isa == simd::Isa::scalar);
}

TEST_CASE("isa names round-trip") {
  for (auto isa : {simd::Isa::scalar, simd::Isa::avx2, simd::Isa::neon})
    CHECK(simd::parse_isa(simd::name(isa)) == isa);
  CHECK_THROWS(simd::parse_isa("sse9"));
}

TEST_CASE("vector kernels match the scalar reference") {
  const auto& ref = simd::table(simd::Isa::scalar);
  for (auto isa : vector_isas()) {
    CAPTURE(simd::name(isa));
    const auto& vec = simd::table(isa);
    Rng rng(42);
    for (std::size_t n = 0; n <= 67; ++n) {
      CAPTURE(n);
      const auto a = random_vector(rng, n), b = random_vector(rng, n);
      const double tol = 1e-14 * (1.0 + abs_dot(a, b));
      CHECK(std::abs(vec.dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <= tol);

      double sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) sq += (a[i] - b[i]) * (a[i] - b[i]);
      CHECK(std::abs(vec.sq_dist(a.data(), b.data(), n) - ref.sq_dist(a.data(), b.data(), n)) <= 1e-14 * (1.0 + sq));

      auto y_ref = b, y_vec = b;
      ref.axpy(0.37, a.data(), y_ref.data(), n);
      vec.axpy(0.37, a.data(), y_vec.data(), n);
      for (std::size_t i = 0; i < n; ++i)
        CHECK(std::abs(y_vec[i] - y_ref[i]) <= 1e-15 * (std::abs(b[i]) + std::abs(0.37 * a[i])));
    }
  }
}

TEST_CASE("detector output agrees across kernel selections") {
  auto det = make_detector(kDefaultDetectorArch);
  det->init_parameters(3);
  Rng rng(9);
  Image x(64, 64);
  for (double& p : x.pixels) p = rng.uniform();
  const simd::Isa original = simd::active().isa;
  simd::select(simd::Isa::scalar);
  const Prediction ref = det->predict(x);
  for (auto isa : vector_isas()) {
    simd::select(isa);
    const Prediction got = det->predict(x);
    CHECK(std::abs(got.confidence - ref.confidence) <= 1e-12);
    REQUIRE(got.feature.size() == ref.feature.size());
    for (std::size_t i = 0; i < ref.feature.size(); ++i)
      CHECK(std::abs(got.feature[i] - ref.feature[i]) <= 1e-10 * (1.0 + std::abs(ref.feature[i])));
  }
  simd::select(original);
}

TEST_CASE("repeated evaluation under one selection is bit-identical") {
  Rng rng(1);
  const auto a = random_vector(rng, 1000), b = random_vector(rng, 1000);
  const double first = simd::dot(a.data(), b.data(), a.size());
  for (int i = 0; i < 5; ++i) CHECK(simd::dot(a.data(), b.data(), a.size()) == first);
}
