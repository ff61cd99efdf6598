#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "devdet/error.hpp"
#include "devdet/metrics.hpp"
#include "devdet/rng.hpp"

using namespace devdet;
using metrics::ScoredSample;

namespace {

// O(|P||N|) pairwise definition, ties counted half.
double pairwise_auc(const std::vector<ScoredSample>& s) {
  double wins = 0.0;
  double pairs = 0.0;
  for (const auto& p : s) {
    if (p.label != 1) continue;
    for (const auto& n : s) {
      if (n.label != 0) continue;
      pairs += 1.0;
      if (p.score > n.score) wins += 1.0;
      else if (p.score == n.score) wins += 0.5;
    }
  }
  return wins / pairs;
}

// Random scores on a coarse grid so ties are frequent; both classes present.
std::vector<ScoredSample> random_set(Rng& rng, std::size_t n, int levels) {
  std::vector<ScoredSample> s(n);
  for (auto& x : s) {
    x.score = static_cast<double>(rng.below(static_cast<std::uint64_t>(levels))) / levels;
    x.label = rng.bernoulli(0.5) ? 1 : 0;
    x.domain_id = static_cast<int>(rng.below(3));
  }
  s[0].label = 1;
  s[1].label = 0;
  return s;
}

}  // namespace

TEST_CASE("auc matches the pairwise formula on random tied score sets") {
  Rng rng(20240611);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(rng.below(499));
    const int levels = trial % 2 ? 5 : 1000;
    const auto s = random_set(rng, n, levels);
    CHECK(metrics::auc(s) == doctest::Approx(pairwise_auc(s)).epsilon(1e-12));
    CHECK(std::abs(metrics::auc(s) - pairwise_auc(s)) <= 1e-12);
  }
}

TEST_CASE("auc edge cases") {
  std::vector<ScoredSample> perfect{{0.9, 1, 0}, {0.8, 1, 0}, {0.1, 0, 0}, {0.2, 0, 0}};
  CHECK(metrics::auc(perfect) == 1.0);
  std::vector<ScoredSample> inverted{{0.1, 1, 0}, {0.9, 0, 0}};
  CHECK(metrics::auc(inverted) == 0.0);
  std::vector<ScoredSample> all_tied{{0.5, 1, 0}, {0.5, 0, 0}, {0.5, 1, 0}};
  CHECK(metrics::auc(all_tied) == 0.5);
  std::vector<ScoredSample> one_class{{0.5, 1, 0}, {0.7, 1, 0}};
  CHECK_THROWS_AS(metrics::auc(one_class), ContractError);
}

TEST_CASE("auc is invariant under strictly increasing transforms") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto s = random_set(rng, 100, 50);
    const double before = metrics::auc(s);
    for (auto& x : s) x.score = std::exp(3.0 * x.score) + 7.0;
    CHECK(metrics::auc(s) == before);
  }
}

TEST_CASE("acc_split follows the prose definitions and the threshold boundary") {
  std::vector<ScoredSample> s{{0.9, 1, 0}, {0.8, 0, 0}};
  auto a = metrics::acc_split(s, 0.5);
  CHECK(*a.fake_acc == 1.0);
  CHECK(*a.real_acc == 0.0);
  CHECK(*a.mean() == 0.5);

  std::vector<ScoredSample> at_tau{{0.5, 1, 0}, {0.5, 0, 0}};
  a = metrics::acc_split(at_tau, 0.5);
  CHECK(*a.fake_acc == 1.0);  // score == tau counts as fake
  CHECK(*a.real_acc == 0.0);

  std::vector<ScoredSample> only_fakes{{0.7, 1, 0}, {0.2, 1, 0}};
  a = metrics::acc_split(only_fakes, 0.5);
  CHECK(*a.fake_acc == 0.5);
  CHECK_FALSE(a.real_acc.has_value());
}

TEST_CASE("acc_split matches a counting oracle exactly") {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = random_set(rng, 1 + static_cast<std::size_t>(rng.below(300)), 20);
    const double tau = 0.05 + 0.9 * rng.uniform();
    std::size_t nf = 0, nr = 0, tf = 0, tr = 0;
    for (const auto& x : s) {
      if (x.label) {
        ++nf;
        tf += x.score >= tau;
      } else {
        ++nr;
        tr += x.score < tau;
      }
    }
    const auto a = metrics::acc_split(s, tau);
    CHECK(*a.fake_acc == static_cast<double>(tf) / static_cast<double>(nf));
    CHECK(*a.real_acc == static_cast<double>(tr) / static_cast<double>(nr));
  }
}

TEST_CASE("acc_split is invariant under transforms preserving the threshold cut") {
  Rng rng(3);
  auto s = random_set(rng, 200, 100);
  const auto before = metrics::acc_split(s, 0.5);
  for (auto& x : s) x.score = x.score >= 0.5 ? 0.5 + (x.score - 0.5) * 0.1 : x.score * x.score;
  const auto after = metrics::acc_split(s, 0.5);
  CHECK(*before.fake_acc == *after.fake_acc);
  CHECK(*before.real_acc == *after.real_acc);
}

TEST_CASE("summarize: one domain pools to that domain's AUC") {
  Rng rng(11);
  auto s = random_set(rng, 150, 30);
  for (auto& x : s) x.domain_id = 4;
  const auto r = metrics::summarize(s);
  REQUIRE(r.per_domain.size() == 1);
  CHECK(r.s_auc == *r.per_domain.at(4).auc);
}

TEST_CASE("summarize: perfectly separated domains with interleaved ranges lose pooled AUC") {
  // Domain 0 lives in [0.1, 0.3], domain 1 in [0.35, 0.4]; each is perfectly separated.
  std::vector<ScoredSample> s{{0.3, 1, 0}, {0.1, 0, 0}, {0.4, 1, 1}, {0.35, 0, 1}};
  const auto r = metrics::summarize(s);
  CHECK(*r.per_domain.at(0).auc == 1.0);
  CHECK(*r.per_domain.at(1).auc == 1.0);
  CHECK(r.s_auc == doctest::Approx(pairwise_auc(s)).epsilon(1e-12));
  CHECK(r.s_auc == 0.75);
  CHECK(r.s_auc < 1.0);
}

TEST_CASE("summarize: pooled S-AUC equals the pairwise oracle, M-ACC is the domain mean") {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    auto s = random_set(rng, 300, 40);
    for (int d = 0; d < 3; ++d) {
      s.push_back({rng.uniform(), 1, d});
      s.push_back({rng.uniform(), 0, d});
    }
    const auto r = metrics::summarize(s, 0.4);
    CHECK(std::abs(r.s_auc - pairwise_auc(s)) <= 1e-12);
    double mean = 0.0;
    for (int d = 0; d < 3; ++d) {
      std::vector<ScoredSample> dom;
      for (const auto& x : s)
        if (x.domain_id == d) dom.push_back(x);
      const auto a = metrics::acc_split(dom, 0.4);
      mean += (*a.fake_acc + *a.real_acc) / 2.0;
      CHECK(*r.per_domain.at(d).auc == doctest::Approx(pairwise_auc(dom)).epsilon(1e-12));
    }
    CHECK(r.m_acc == doctest::Approx(mean / 3.0).epsilon(1e-15));
  }
}

TEST_CASE("report text round-trips bit-exactly") {
  Rng rng(8);
  auto s = random_set(rng, 120, 1000);
  for (auto& x : s) x.score = rng.uniform();
  std::vector<ScoredSample> one_class_domain{{0.3, 1, 9}, {0.8, 1, 9}};
  s.insert(s.end(), one_class_domain.begin(), one_class_domain.end());
  const auto r = metrics::summarize(s, 0.37);
  const auto back = metrics::report_from_text(metrics::to_text(r));
  CHECK(back == r);
  CHECK(metrics::to_text(back) == metrics::to_text(r));
  CHECK_FALSE(r.per_domain.at(9).auc.has_value());
  CHECK_FALSE(r.per_domain.at(9).real_acc.has_value());
}
