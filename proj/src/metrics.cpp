#include "devdet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include <json.hpp>

#include "devdet/error.hpp"

namespace devdet::metrics {
namespace {

void require_finite(std::span<const ScoredSample> scored) {
  for (const auto& s : scored)
    if (!std::isfinite(s.score)) throw ContractError("non-finite score");
}

}  // namespace

double auc(std::span<const ScoredSample> scored) {
  require_finite(scored);
  std::vector<std::size_t> order(scored.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scored[a].score < scored[b].score; });

  // Twice the rank sum of fakes, with midranks for ties; stays integral.
  std::uint64_t twice_rank_sum = 0;
  std::uint64_t n_pos = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scored[order[j + 1]].score == scored[order[i]].score) ++j;
    const std::uint64_t twice_midrank = (i + 1) + (j + 1);
    for (std::size_t k = i; k <= j; ++k) {
      if (scored[order[k]].label == 1) {
        twice_rank_sum += twice_midrank;
        ++n_pos;
      }
    }
    i = j + 1;
  }
  const std::uint64_t n_neg = scored.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw ContractError("AUC undefined: need both real and fake samples");
  const std::uint64_t twice_u = twice_rank_sum - n_pos * (n_pos + 1);
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::optional<double> AccSplit::mean() const {
  if (fake_acc && real_acc) return (*fake_acc + *real_acc) / 2.0;
  if (fake_acc) return fake_acc;
  return real_acc;
}

AccSplit acc_split(std::span<const ScoredSample> scored, double threshold) {
  require_finite(scored);
  std::size_t fakes = 0, reals = 0, fake_hits = 0, real_hits = 0;
  for (const auto& s : scored) {
    const bool called_fake = s.score >= threshold;
    if (s.label == 1) {
      ++fakes;
      fake_hits += called_fake ? 1 : 0;
    } else {
      ++reals;
      real_hits += called_fake ? 0 : 1;
    }
  }
  AccSplit out;
  if (fakes > 0) out.fake_acc = static_cast<double>(fake_hits) / static_cast<double>(fakes);
  if (reals > 0) out.real_acc = static_cast<double>(real_hits) / static_cast<double>(reals);
  return out;
}

double balanced_acc(std::span<const ScoredSample> scored, double threshold) {
  const auto m = acc_split(scored, threshold).mean();
  if (!m) throw ContractError("accuracy undefined on an empty set");
  return *m;
}

MetricsReport summarize(std::span<const ScoredSample> scored, double threshold) {
  if (scored.empty()) throw ContractError("summarize needs at least one sample");
  MetricsReport report;
  report.threshold = threshold;
  report.s_auc = auc(scored);

  std::map<int, std::vector<ScoredSample>> by_domain;
  for (const auto& s : scored) by_domain[s.domain_id].push_back(s);

  double acc_sum = 0.0;
  for (const auto& [domain, items] : by_domain) {
    DomainMetrics dm;
    for (const auto& s : items) (s.label == 1 ? dm.n_fake : dm.n_real) += 1;
    if (dm.n_fake > 0 && dm.n_real > 0) dm.auc = auc(items);
    const AccSplit split = acc_split(items, threshold);
    dm.fake_acc = split.fake_acc;
    dm.real_acc = split.real_acc;
    acc_sum += *split.mean();
    report.per_domain.emplace(domain, dm);
  }
  report.m_acc = acc_sum / static_cast<double>(by_domain.size());
  return report;
}

namespace {

using Json = nlohmann::ordered_json;

Json opt(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> opt_from(const Json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

std::string to_text(const MetricsReport& report) {
  Json j;
  j["threshold"] = report.threshold;
  j["s_auc"] = report.s_auc;
  j["m_acc"] = report.m_acc;
  Json domains = Json::array();
  for (const auto& [id, dm] : report.per_domain) {
    Json d;
    d["domain_id"] = id;
    d["auc"] = opt(dm.auc);
    d["f_acc"] = opt(dm.fake_acc);
    d["r_acc"] = opt(dm.real_acc);
    d["n_fake"] = dm.n_fake;
    d["n_real"] = dm.n_real;
    domains.push_back(std::move(d));
  }
  j["per_domain"] = std::move(domains);
  return j.dump(2) + "\n";
}

MetricsReport report_from_text(const std::string& text) {
  MetricsReport r;
  try {
    const Json j = Json::parse(text);
    r.threshold = j.at("threshold").get<double>();
    r.s_auc = j.at("s_auc").get<double>();
    r.m_acc = j.at("m_acc").get<double>();
    for (const auto& d : j.at("per_domain")) {
      DomainMetrics dm;
      dm.auc = opt_from(d.at("auc"));
      dm.fake_acc = opt_from(d.at("f_acc"));
      dm.real_acc = opt_from(d.at("r_acc"));
      dm.n_fake = d.at("n_fake").get<std::size_t>();
      dm.n_real = d.at("n_real").get<std::size_t>();
      r.per_domain.emplace(d.at("domain_id").get<int>(), dm);
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("malformed metrics report: ") + e.what());
  }
  return r;
}

}  // namespace devdet::metrics
