#include "devdet/mining.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "devdet/error.hpp"

namespace devdet {

namespace {

std::string format_confidence(double c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9f", c);
  return buf;
}

}  // namespace

double round_confidence(double c) { return std::strtod(format_confidence(c).c_str(), nullptr); }

ScoreTable score_table(const SampleSet& set, const std::vector<double>& confidences) {
  if (confidences.size() != set.size()) throw ContractError("score count does not match sample count");
  ScoreTable t;
  t.reserve(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    const Sample& s = set.samples[i];
    t.push_back({s.sample_id, round_confidence(confidences[i]), s.label, s.domain_id});
  }
  return t;
}

ScoreTable score_table(const Detector& model, const SampleSet& set) { return score_table(set, confidences(model, set)); }

void write_score_table(const std::string& path, const ScoreTable& table, const std::string& config_hash) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "# config_hash " << (config_hash.empty() ? "-" : config_hash) << '\n';
  out << "sample_id\tconfidence\tlabel\tdomain_id\n";
  for (const auto& r : table)
    out << r.sample_id << '\t' << format_confidence(r.confidence) << '\t' << r.label << '\t' << r.domain_id << '\n';
  if (!out) throw IoError("failed writing " + path);
}

ScoreTable read_score_table(const std::string& path, std::string* config_hash) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read score table " + path);
  ScoreTable t;
  std::string line;
  int lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string key = "# config_hash ";
      if (config_hash && line.rfind(key, 0) == 0) {
        *config_hash = line.substr(key.size());
        if (*config_hash == "-") config_hash->clear();
      }
      continue;
    }
    if (!header_seen) {
      if (line != "sample_id\tconfidence\tlabel\tdomain_id") throw LoadError(path + ":" + std::to_string(lineno) + ": bad column header");
      header_seen = true;
      continue;
    }
    std::istringstream fields(line);
    std::string id, conf, label, domain;
    if (!std::getline(fields, id, '\t') || !std::getline(fields, conf, '\t') || !std::getline(fields, label, '\t') ||
        !std::getline(fields, domain))
      throw LoadError(path + ":" + std::to_string(lineno) + ": expected 4 tab-separated fields");
    ScoreRecord r;
    r.sample_id = id;
    char* end = nullptr;
    r.confidence = std::strtod(conf.c_str(), &end);
    if (end == conf.c_str() || *end != '\0' || !(r.confidence >= 0.0 && r.confidence <= 1.0))
      throw LoadError(path + ": record " + id + ": bad confidence '" + conf + "'");
    if (label != "0" && label != "1") throw LoadError(path + ": record " + id + ": bad label '" + label + "'");
    r.label = label[0] - '0';
    try {
      std::size_t pos = 0;
      r.domain_id = std::stoi(domain, &pos);
      if (pos != domain.size()) throw std::invalid_argument(domain);
    } catch (const std::exception&) {
      throw LoadError(path + ": record " + id + ": bad domain_id '" + domain + "'");
    }
    t.push_back(std::move(r));
  }
  if (!header_seen) throw LoadError(path + ": missing column header");
  return t;
}

std::string to_string(MiningStrategy s) {
  switch (s) {
    case MiningStrategy::HF_ER: return "HF_ER";
    case MiningStrategy::HF_only: return "HF_only";
    case MiningStrategy::HF_HR: return "HF_HR";
    case MiningStrategy::ALL: return "ALL";
  }
  return "?";
}

MiningStrategy parse_strategy(const std::string& s) {
  for (auto k : {MiningStrategy::HF_ER, MiningStrategy::HF_only, MiningStrategy::HF_HR, MiningStrategy::ALL})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown mining strategy '" + s + "' (expected HF_ER, HF_only, HF_HR or ALL)");
}

std::vector<std::string> validate(const MiningConfig& c, const std::string& prefix) {
  std::vector<std::string> v;
  if (c.k_hard_fake < 0) v.push_back(prefix + ".k_hard_fake must be >= 0 (0 = use the fraction)");
  if (c.k_easy_real < 0) v.push_back(prefix + ".k_easy_real must be >= 0 (0 = use the fraction)");
  if (!(c.hard_fake_fraction > 0.0 && c.hard_fake_fraction <= 1.0)) v.push_back(prefix + ".hard_fake_fraction must lie in (0, 1]");
  if (!(c.easy_real_fraction > 0.0 && c.easy_real_fraction <= 1.0)) v.push_back(prefix + ".easy_real_fraction must lie in (0, 1]");
  return v;
}

std::size_t resolve_volume(int k, double fraction, std::size_t population, const std::string& what) {
  std::size_t n = k > 0 ? static_cast<std::size_t>(k)
                        : std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(population))));
  if (n > population)
    throw ContractError(what + " = " + std::to_string(n) + " exceeds the class population of " + std::to_string(population));
  return n;
}

std::vector<std::string> select_extreme(const ScoreTable& table, int label, std::size_t k, bool highest) {
  std::vector<const ScoreRecord*> pool;
  for (const auto& r : table)
    if (r.label == label) pool.push_back(&r);
  if (k > pool.size())
    throw ContractError("requested " + std::to_string(k) + " samples but the class population is " + std::to_string(pool.size()));
  auto before = [highest](const ScoreRecord* a, const ScoreRecord* b) {
    if (a->confidence != b->confidence) return highest ? a->confidence > b->confidence : a->confidence < b->confidence;
    return a->sample_id < b->sample_id;
  };
  std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k), pool.end(), before);
  std::vector<std::string> ids;
  ids.reserve(k);
  for (std::size_t i = 0; i < k; ++i) ids.push_back(pool[i]->sample_id);
  return ids;
}

namespace {

std::size_t population(const ScoreTable& t, int label) {
  return static_cast<std::size_t>(std::count_if(t.begin(), t.end(), [&](const ScoreRecord& r) { return r.label == label; }));
}

}  // namespace

MinedIds mine(const ScoreTable& table, const MiningConfig& config) {
  if (auto v = validate(config, "mining"); !v.empty()) throw ConfigError(std::move(v));
  const std::size_t n_fake = population(table, 1), n_real = population(table, 0);
  if (n_fake == 0 || n_real == 0) throw ContractError("mining needs both real and fake samples");
  MinedIds out;
  out.hard_fake = select_extreme(table, 1, resolve_volume(config.k_hard_fake, config.hard_fake_fraction, n_fake, "k_hard_fake"));
  out.easy_real = select_extreme(table, 0, resolve_volume(config.k_easy_real, config.easy_real_fraction, n_real, "k_easy_real"));
  return out;
}

std::vector<std::string> mine_variant(const ScoreTable& table, const MiningConfig& config) {
  if (config.strategy == MiningStrategy::ALL) {
    std::vector<std::string> ids;
    for (const auto& r : table) ids.push_back(r.sample_id);
    return ids;
  }
  MinedIds m = mine(table, config);
  std::vector<std::string> ids = m.hard_fake;
  if (config.strategy == MiningStrategy::HF_ER) {
    ids.insert(ids.end(), m.easy_real.begin(), m.easy_real.end());
  } else if (config.strategy == MiningStrategy::HF_HR) {
    const auto hr = select_extreme(table, 0, m.easy_real.size(), true);
    ids.insert(ids.end(), hr.begin(), hr.end());
  }
  return ids;
}

SampleSet select_ids(const SampleSet& set, const std::vector<std::string>& ids, std::string name) {
  std::unordered_map<std::string, const Sample*> by_id;
  for (const auto& s : set.samples) by_id.emplace(s.sample_id, &s);
  SampleSet out;
  out.name = std::move(name);
  out.samples.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw ContractError("sample " + id + " is not in set " + set.name);
    out.samples.push_back(*it->second);
  }
  return out;
}

SampleSet MinedSets::s1() const {
  SampleSet out;
  out.name = "S_1";
  out.samples = hard_fake.samples;
  out.samples.insert(out.samples.end(), easy_real.samples.begin(), easy_real.samples.end());
  return out;
}

MinedSets mine(const Detector& model, const SampleSet& train, const MiningConfig& config) {
  const MinedIds ids = mine(score_table(model, train), config);
  return {select_ids(train, ids.hard_fake, "S_HF"), select_ids(train, ids.easy_real, "S_ER")};
}

SampleSet mine_variant(const Detector& model, const SampleSet& train, const MiningConfig& config) {
  return select_ids(train, mine_variant(score_table(model, train), config), "S_1_" + to_string(config.strategy));
}

}  // namespace devdet
