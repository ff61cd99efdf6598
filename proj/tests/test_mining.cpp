#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "devdet/error.hpp"
#include "devdet/mining.hpp"
#include "devdet/rng.hpp"

using namespace devdet;

namespace {

ScoreTable table_of(const std::vector<std::tuple<std::string, double, int>>& rows) {
  ScoreTable t;
  for (const auto& [id, c, y] : rows) t.push_back({id, c, y, 0});
  return t;
}

// Ties are common: confidences on a 0.01 grid.
ScoreTable random_table(std::uint64_t seed, int n) {
  Rng rng(seed);
  ScoreTable t;
  for (int i = 0; i < n; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "s%06d", static_cast<int>(rng.uniform() * 1e6));
    t.push_back({id + std::string("_") + std::to_string(i), std::round(rng.uniform() * 100) / 100, rng.bernoulli(0.5) ? 1 : 0,
                 static_cast<int>(rng.uniform() * 4)});
  }
  return t;
}

// Full sort of (confidence, sample_id) of one label, first k ids.
std::vector<std::string> brute_force(const ScoreTable& t, int label, std::size_t k, bool highest) {
  std::vector<std::pair<double, std::string>> v;
  for (const auto& r : t)
    if (r.label == label) v.emplace_back(highest ? -r.confidence : r.confidence, r.sample_id);
  std::sort(v.begin(), v.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(v[i].second);
  return out;
}

SampleSet toy_set(int n, std::uint64_t seed) {
  SampleSet s{"train", {}};
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    Image img(8, 8);
    for (double& v : img.pixels) v = rng.uniform();
    char id[16];
    std::snprintf(id, sizeof id, "s%06d", i);
    s.samples.push_back(Sample{std::make_shared<const Image>(std::move(img)), i % 2, i % 3, id});
  }
  return s;
}

}  // namespace

TEST_CASE("hardest fake is the argmin") {
  const auto t = table_of({{"a", 0.9, 1}, {"b", 0.2, 1}, {"c", 0.6, 1}});
  MiningConfig cfg;
  cfg.k_hard_fake = 1;
  cfg.k_easy_real = 1;
  CHECK(select_extreme(t, 1, 1) == std::vector<std::string>{"b"});
}

TEST_CASE("ties are broken by sample_id") {
  const auto t = table_of({{"r3", 0.1, 0}, {"r2", 0.4, 0}, {"r1", 0.1, 0}});
  CHECK(select_extreme(t, 0, 2) == std::vector<std::string>{"r1", "r3"});
}

TEST_CASE("hard reals are the highest-confidence reals") {
  const auto t = table_of({{"f", 0.3, 1}, {"r1", 0.1, 0}, {"r2", 0.8, 0}});
  MiningConfig cfg;
  cfg.k_hard_fake = 1;
  cfg.k_easy_real = 1;
  cfg.strategy = MiningStrategy::HF_HR;
  CHECK(mine_variant(t, cfg) == std::vector<std::string>{"f", "r2"});
}

TEST_CASE("selection equals a brute-force full sort") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const ScoreTable t = random_table(seed, 300);
    std::size_t fakes = 0;
    for (const auto& r : t) fakes += r.label == 1;
    for (std::size_t k : {std::size_t{1}, fakes / 10, fakes / 2, fakes}) {
      if (k == 0) continue;
      CHECK(select_extreme(t, 1, k) == brute_force(t, 1, k, false));
      CHECK(select_extreme(t, 1, k, true).size() == k);
      // Highest-first ties still break by ascending id.
      CHECK(select_extreme(t, 1, k, true) == brute_force(t, 1, k, true));
    }
  }
}

TEST_CASE("mining with a detector on a seeded set equals the full-sort oracle") {
  const SampleSet train = toy_set(120, 5);
  auto det = make_detector("mlp-s8-h6.4");
  det->init_parameters(6);
  MiningConfig cfg;
  cfg.k_hard_fake = 9;
  cfg.k_easy_real = 7;
  const MinedSets m = mine(*det, train, cfg);
  const ScoreTable t = score_table(*det, train);
  std::vector<std::string> hf, er;
  for (const auto& s : m.hard_fake.samples) hf.push_back(s.sample_id);
  for (const auto& s : m.easy_real.samples) er.push_back(s.sample_id);
  CHECK(hf == brute_force(t, 1, 9, false));
  CHECK(er == brute_force(t, 0, 7, false));
  CHECK(std::all_of(m.hard_fake.samples.begin(), m.hard_fake.samples.end(), [](const Sample& s) { return s.label == 1; }));
  CHECK(std::all_of(m.easy_real.samples.begin(), m.easy_real.samples.end(), [](const Sample& s) { return s.label == 0; }));
  CHECK(m.s1().size() == 16);

  const SampleSet variant = mine_variant(*det, train, cfg);
  std::set<std::string> a, b;
  for (const auto& s : variant.samples) a.insert(s.sample_id);
  for (const auto& s : m.s1().samples) b.insert(s.sample_id);
  CHECK(a == b);
}

TEST_CASE("ALL returns the training set and HF_only the hard fakes") {
  const ScoreTable t = random_table(3, 200);
  MiningConfig cfg;
  cfg.strategy = MiningStrategy::ALL;
  const auto all = mine_variant(t, cfg);
  REQUIRE(all.size() == t.size());
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(all[i] == t[i].sample_id);
  cfg.strategy = MiningStrategy::HF_only;
  CHECK(mine_variant(t, cfg) == mine(t, cfg).hard_fake);
  cfg.strategy = MiningStrategy::HF_ER;
  const MinedIds ids = mine(t, cfg);
  std::vector<std::string> joined = ids.hard_fake;
  joined.insert(joined.end(), ids.easy_real.begin(), ids.easy_real.end());
  CHECK(mine_variant(t, cfg) == joined);

  const SampleSet train = toy_set(30, 2);
  auto det = make_detector("mlp-s8-h6.4");
  det->init_parameters(1);
  cfg.strategy = MiningStrategy::ALL;
  const SampleSet everything = mine_variant(*det, train, cfg);
  REQUIRE(everything.size() == train.size());
  std::set<std::string> got, want;
  for (const auto& s : everything.samples) got.insert(s.sample_id);
  for (const auto& s : train.samples) want.insert(s.sample_id);
  CHECK(got == want);
}

TEST_CASE("larger k gives a superset and the sets stay disjoint") {
  const ScoreTable t = random_table(9, 400);
  for (std::size_t k = 1; k < 150; ++k) {
    const auto small = select_extreme(t, 1, k), large = select_extreme(t, 1, k + 1);
    CHECK(std::equal(small.begin(), small.end(), large.begin()));
  }
  const MinedIds m = mine(t, MiningConfig{});
  std::set<std::string> hf(m.hard_fake.begin(), m.hard_fake.end());
  for (const auto& id : m.easy_real) CHECK(hf.count(id) == 0);
}

TEST_CASE("default volumes are 10% of each class") {
  CHECK(resolve_volume(0, 0.1, 560, "hard fakes") == 56);
  CHECK(resolve_volume(0, 0.1, 4, "hard fakes") == 1);
  CHECK(resolve_volume(12, 0.1, 560, "hard fakes") == 12);
  try {
    resolve_volume(600, 0.1, 560, "hard fakes");
    FAIL("expected ContractError");
  } catch (const ContractError& e) {
    CHECK(std::string(e.what()).find("560") != std::string::npos);
  }
}

TEST_CASE("selection depends only on (confidence, sample_id)") {
  ScoreTable t = random_table(4, 200);
  const MinedIds a = mine(t, MiningConfig{});
  std::reverse(t.begin(), t.end());
  for (auto& r : t) r.domain_id = 7;
  const MinedIds b = mine(t, MiningConfig{});
  CHECK(a.hard_fake == b.hard_fake);
  CHECK(a.easy_real == b.easy_real);
}

TEST_CASE("score table round-trip and mining from the cached table") {
  const SampleSet train = toy_set(40, 8);
  auto det = make_detector("mlp-s8-h6.4");
  det->init_parameters(2);
  const ScoreTable t = score_table(*det, train);
  for (const auto& r : t) CHECK(r.confidence == round_confidence(r.confidence));
  const auto path = std::filesystem::temp_directory_path() / "devdet_test_mining_scores.tsv";
  write_score_table(path.string(), t, "abcdef0123456789");
  std::string hash;
  const ScoreTable back = read_score_table(path.string(), &hash);
  CHECK(back == t);
  CHECK(hash == "abcdef0123456789");
  MiningConfig cfg;
  CHECK(mine(back, cfg).hard_fake == mine(t, cfg).hard_fake);

  std::ofstream(path) << "# config_hash x\nsample_id\tconfidence\tlabel\tdomain_id\ns1\tnot-a-number\t1\t0\n";
  try {
    read_score_table(path.string());
    FAIL("expected LoadError");
  } catch (const LoadError& e) {
    CHECK(std::string(e.what()).find("record s1") != std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST_CASE("strategy names and config validation") {
  for (auto s : {MiningStrategy::HF_ER, MiningStrategy::HF_only, MiningStrategy::HF_HR, MiningStrategy::ALL})
    CHECK(parse_strategy(to_string(s)) == s);
  CHECK_THROWS_AS(parse_strategy("HF_XX"), ConfigError);
  MiningConfig bad;
  bad.k_hard_fake = -1;
  bad.easy_real_fraction = 1.5;
  CHECK(validate(bad, "mining").size() == 2);
  CHECK(validate(MiningConfig{}, "mining").empty());
  CHECK_THROWS_AS(select_ids(toy_set(4, 1), {"nope"}, "x"), ContractError);
}
