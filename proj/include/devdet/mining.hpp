#pragma once
// Hard-fake / easy-real selection by confidence ranking against the frozen
// pretrained detector. Selection only looks at (confidence, sample_id)
// pairs, so it can be recomputed from a cached score table.
#include <string>
#include <vector>

#include "devdet/data.hpp"
#include "devdet/detector.hpp"

namespace devdet {

struct ScoreRecord {
  std::string sample_id;
  double confidence = 0.0;  // rounded to 9 decimals, as stored on disk
  int label = 0;
  int domain_id = 0;
  friend bool operator==(const ScoreRecord&, const ScoreRecord&) = default;
};

using ScoreTable = std::vector<ScoreRecord>;

// Confidence rounded to 9 decimals exactly as the score-table text stores it.
double round_confidence(double confidence);

// Scores every sample in set order.
ScoreTable score_table(const Detector& model, const SampleSet& set);
ScoreTable score_table(const SampleSet& set, const std::vector<double>& confidences);

// Tab-separated: "# config_hash <hex>" line, column header, one record per line.
void write_score_table(const std::string& path, const ScoreTable& table, const std::string& config_hash = "");
// Throws LoadError naming the line on malformed input.
ScoreTable read_score_table(const std::string& path, std::string* config_hash = nullptr);

enum class MiningStrategy { HF_ER, HF_only, HF_HR, ALL };

std::string to_string(MiningStrategy s);
MiningStrategy parse_strategy(const std::string& s);  // throws ConfigError

struct MiningConfig {
  // Explicit volumes; 0 means "use the fraction of the class population".
  int k_hard_fake = 0;
  int k_easy_real = 0;
  double hard_fake_fraction = 0.1;
  double easy_real_fraction = 0.1;
  MiningStrategy strategy = MiningStrategy::HF_ER;
};

std::vector<std::string> validate(const MiningConfig& config, const std::string& prefix);

// Resolved volume for a class population: explicit k, otherwise
// max(1, round(fraction * population)). Throws ContractError when the
// result exceeds the population.
std::size_t resolve_volume(int k, double fraction, std::size_t population, const std::string& what);

struct MinedIds {
  std::vector<std::string> hard_fake;  // lowest-confidence fakes, hardest first
  std::vector<std::string> easy_real;  // lowest-confidence reals, easiest first
};

// k lowest-confidence records of `label` (ascending, ties by sample_id), or
// the highest-confidence ones when `highest` is set.
std::vector<std::string> select_extreme(const ScoreTable& table, int label, std::size_t k, bool highest = false);

MinedIds mine(const ScoreTable& table, const MiningConfig& config);
// The stage-1 id list of a strategy: HF_ER = HF then ER, HF_only = HF,
// HF_HR = HF then the hardest (highest-confidence) reals, ALL = every record.
std::vector<std::string> mine_variant(const ScoreTable& table, const MiningConfig& config);

// Samples of `set` with the given ids, in the order of `ids`. Throws ContractError on unknown ids.
SampleSet select_ids(const SampleSet& set, const std::vector<std::string>& ids, std::string name);

struct MinedSets {
  SampleSet hard_fake;
  SampleSet easy_real;
  SampleSet s1() const;  // union, HF first
};

MinedSets mine(const Detector& model, const SampleSet& train, const MiningConfig& config);
SampleSet mine_variant(const Detector& model, const SampleSet& train, const MiningConfig& config);

}  // namespace devdet
