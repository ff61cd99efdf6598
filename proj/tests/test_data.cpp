#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "devdet/config.hpp"
#include "devdet/data.hpp"
#include "devdet/datagen.hpp"
#include "devdet/error.hpp"

using namespace devdet;
namespace fs = std::filesystem;

namespace {

// 4 domains x 2 classes x 200 at 32x32, generated once per process.
const fs::path& benchmark_dir() {
  static const fs::path dir = [] {
    const fs::path p = fs::temp_directory_path() / "devdet_test_data_bench";
    fs::remove_all(p);
    datagen::BenchmarkConfig c = default_benchmark();
    c.domains.resize(4);
    c.holdout_domain_ids.clear();
    c.image_size = 32;
    c.stats_samples_per_class = 4;
    datagen::generate_benchmark(c, p);
    return p;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path copy_benchmark(const std::string& name) {
  const fs::path dst = fs::temp_directory_path() / ("devdet_test_data_" + name);
  fs::remove_all(dst);
  fs::copy(benchmark_dir(), dst, fs::copy_options::recursive);
  return dst;
}

}  // namespace

TEST_CASE("manifest of 1600 records loads 1600 samples") {
  const SampleSet s = load_manifest(benchmark_dir() / "manifest.txt");
  CHECK(s.size() == 1600);
  CHECK(s.count_label(1) == 800);
  std::set<std::string> ids;
  for (const auto& x : s.samples) {
    ids.insert(x.sample_id);
    CHECK((x.label == 0 || x.label == 1));
    CHECK(std::all_of(x.image->pixels.begin(), x.image->pixels.end(), [](double v) { return v >= 0.0 && v <= 1.0; }));
  }
  CHECK(ids.size() == 1600);
}

TEST_CASE("reloading gives the same order and ids") {
  const SampleSet a = load_manifest(benchmark_dir() / "manifest.txt");
  const SampleSet b = load_manifest(benchmark_dir() / "manifest.txt");
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.samples[i].sample_id == b.samples[i].sample_id);
    CHECK(*a.samples[i].image == *b.samples[i].image);
  }
}

TEST_CASE("a label of 2 is rejected naming the sample") {
  const fs::path dir = copy_benchmark("badlabel");
  std::string text = slurp(dir / "manifest.txt");
  const std::string needle = "images/s000005.ppm\t0\t";
  const auto pos = text.find(needle);
  REQUIRE(pos != std::string::npos);
  text[pos + needle.size() - 2] = '2';
  std::ofstream(dir / "manifest.txt", std::ios::binary) << text;
  try {
    load_manifest(dir / "manifest.txt");
    FAIL("expected LoadError");
  } catch (const LoadError& e) {
    CHECK(std::string(e.what()).find("s000005") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("a missing image is rejected naming the sample") {
  const fs::path dir = copy_benchmark("missing");
  fs::remove(dir / "images" / "s000123.ppm");
  try {
    load_manifest(dir / "manifest.txt");
    FAIL("expected LoadError");
  } catch (const LoadError& e) {
    CHECK(std::string(e.what()).find("s000123") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("save then load is element-wise identical") {
  const SampleSet a = load_manifest(benchmark_dir() / "manifest.txt").filter("sub", [](const Sample& s) {
    return s.domain_id == 2;
  });
  const fs::path dir = fs::temp_directory_path() / "devdet_test_data_roundtrip";
  fs::remove_all(dir);
  save_sample_set(a, dir);
  const SampleSet b = load_manifest(dir / "manifest.txt");
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.samples[i].sample_id == b.samples[i].sample_id);
    CHECK(a.samples[i].label == b.samples[i].label);
    CHECK(a.samples[i].domain_id == b.samples[i].domain_id);
    CHECK(a.samples[i].split == b.samples[i].split);
    CHECK(*a.samples[i].image == *b.samples[i].image);
  }
  fs::remove_all(dir);
}

TEST_CASE("split and domain filters") {
  const SampleSet s = load_manifest(benchmark_dir() / "manifest.txt");
  const SampleSet train = split_of(s, datagen::Split::train);
  const SampleSet test = split_of(s, datagen::Split::test, {3});
  CHECK(std::all_of(train.samples.begin(), train.samples.end(), [](const Sample& x) { return x.split == datagen::Split::train; }));
  CHECK(std::none_of(test.samples.begin(), test.samples.end(), [](const Sample& x) { return x.domain_id == 3; }));
  const SampleSet d1 = domains_of(s, datagen::Split::test, {1});
  CHECK(!d1.empty());
  CHECK(std::all_of(d1.samples.begin(), d1.samples.end(), [](const Sample& x) {
    return x.domain_id == 1 && x.split == datagen::Split::test;
  }));
  CHECK(split_of(s, datagen::Split::train).size() + split_of(s, datagen::Split::val).size() +
            split_of(s, datagen::Split::test).size() ==
        s.size());
}

TEST_CASE("10 samples in batches of 4 gives sizes 4, 4, 2") {
  const auto b = epoch_batches(10, 4, 1, 0);
  REQUIRE(b.size() == 3);
  CHECK(b[0].size() == 4);
  CHECK(b[1].size() == 4);
  CHECK(b[2].size() == 2);
}

TEST_CASE("batches: seeded permutation covering the set once") {
  for (std::size_t n : {1u, 7u, 64u, 257u})
    for (std::size_t bs : {1u, 3u, 32u}) {
      const auto a = epoch_batches(n, bs, 42, 3);
      CHECK(a == epoch_batches(n, bs, 42, 3));
      std::vector<std::size_t> all;
      for (const auto& batch : a) all.insert(all.end(), batch.begin(), batch.end());
      std::sort(all.begin(), all.end());
      std::vector<std::size_t> expected(n);
      for (std::size_t i = 0; i < n; ++i) expected[i] = i;
      CHECK(all == expected);
    }
  CHECK(epoch_batches(100, 10, 42, 0) != epoch_batches(100, 10, 42, 1));
  CHECK(epoch_batches(100, 10, 42, 0) != epoch_batches(100, 10, 43, 0));
  CHECK_THROWS_AS(epoch_batches(10, 0, 1, 0), ContractError);
}

TEST_CASE("batch stream ends each epoch and starts the next") {
  SampleSet s{"toy", {}};
  for (int i = 0; i < 10; ++i)
    s.samples.push_back(Sample{std::make_shared<const Image>(4, 4), i % 2, 0, "id" + std::to_string(i)});
  BatchStream stream(s, 4, 9);
  std::vector<std::size_t> sizes;
  while (auto b = stream.next()) sizes.push_back(b->size());
  CHECK(sizes == std::vector<std::size_t>{4, 4, 2});
  CHECK(stream.epoch() == 1);
  auto first = stream.next();
  REQUIRE(first.has_value());
  const auto expected = epoch_batches(10, 4, 9, 1)[0];
  for (std::size_t i = 0; i < expected.size(); ++i) CHECK((*first)[i] == &s.samples[expected[i]]);
}

TEST_CASE("augmentation is reproducible from (seed, epoch, sample_id)") {
  Image img(16, 16);
  for (std::size_t i = 0; i < img.size(); ++i) img.pixels[i] = static_cast<double>(i % 251) / 250.0;
  const AugmentConfig cfg;
  CHECK(augment(img, cfg, 3, 2, "s000001") == augment(img, cfg, 3, 2, "s000001"));
  int differ = 0;
  for (int e = 0; e < 20; ++e) differ += augment(img, cfg, 3, e, "s000001") != augment(img, cfg, 3, e, "s000002");
  CHECK(differ > 0);
}

TEST_CASE("augmentation: flip only, jitter bounds, identity at probability 0") {
  Image img(8, 8);
  for (std::size_t i = 0; i < img.size(); ++i) img.pixels[i] = static_cast<double>(i) / static_cast<double>(img.size());
  AugmentConfig none{0.0, 0.0, 0.03, 0.05};
  CHECK(augment(img, none, 1, 0, "x") == img);

  AugmentConfig flip{1.0, 0.0, 0.03, 0.05};
  const Image f = augment(img, flip, 1, 0, "x");
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) CHECK(f.at(c, y, x) == img.at(c, y, 7 - x));

  AugmentConfig jitter{0.0, 1.0, 0.03, 0.05};
  for (int e = 0; e < 20; ++e) {
    const Image j = augment(img, jitter, 1, e, "x");
    for (std::size_t i = 0; i < img.size(); ++i) {
      CHECK(j.pixels[i] >= 0.0);
      CHECK(j.pixels[i] <= 1.0);
      // |(v - 0.5) c + 0.5 + b - v| <= 0.5 * 0.05 + 0.03
      CHECK(std::abs(j.pixels[i] - img.pixels[i]) <= 0.055 + 1e-12);
    }
  }
}
