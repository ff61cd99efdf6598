// Run configuration: one JSON document drives every command. All stage seeds
// derive from the root seed through named substreams; per-stage hashes chain
// so that every artifact can be traced to the config that produced it.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "devdet/datagen.hpp"
#include "devdet/detector.hpp"
#include "devdet/ffdev.hpp"
#include "devdet/mining.hpp"

namespace devdet {

struct DictConfig {
  int num_atoms = 0;  // 0 = min(64, N/4)
  double lambda_l1 = 0.1;
  double calib_lo_percentile = 5.0;
  double calib_hi_percentile = 95.0;
  int max_rounds = 100;
  double tolerance = 1e-6;
};

struct DaftConfig {
  double learning_rate_scale = 0.1;  // times train.learning_rate
  int epochs = 10;
  double base_dose = 0.25;
  bool parallel = false;  // DAFT-P instead of sequential DAFT-S
};

struct EvalConfig {
  double threshold = 0.5;
  int histogram_bins = 20;
};

struct RunConfig {
  std::uint64_t seed = 0;
  datagen::BenchmarkConfig benchmark;  // benchmark.seed is derived, not read
  std::string detector_architecture = kDefaultDetectorArch;
  TrainConfig train;  // train.seed is derived
  MiningConfig mining;
  Stage1Config stage1;  // stage1.seed is derived
  DictConfig dict;
  DaftConfig daft;
  EvalConfig eval;
  std::filesystem::path artifact_dir = "runs/default";  // not hashed
};

struct StageSeeds {
  std::uint64_t benchmark = 0;
  std::uint64_t detector_init = 0;
  std::uint64_t pretrain = 0;
  std::uint64_t generator_init = 0;
  std::uint64_t stage1 = 0;
  std::uint64_t dict = 0;
  std::uint64_t daft = 0;
  std::uint64_t daft_parallel = 0;
};

StageSeeds stage_seeds(std::uint64_t root);

// Writes the derived seeds into benchmark, train and stage1.
void apply_seeds(RunConfig& config);

datagen::BenchmarkConfig default_benchmark();
RunConfig default_run_config();

std::vector<std::string> validate(const RunConfig& config);

nlohmann::ordered_json to_json(const RunConfig& config);
// Missing keys keep their defaults; unknown keys, type errors and invariant
// violations are collected and thrown together as one ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const RunConfig& config, const std::filesystem::path& path);

// Each stage hash covers its own config section plus its upstream hashes.
struct StageHashes {
  std::string benchmark;
  std::string pretrain;
  std::string mine;
  std::string stage1;
  std::string dict;
  std::string daft;
  std::string eval;
};

StageHashes stage_hashes(const RunConfig& config);
std::string config_hash(const RunConfig& config);  // whole config minus artifact_dir

}  // namespace devdet
