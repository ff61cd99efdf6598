// Command layer: each stage consumes the previous stage's artifacts from the
// artifact directory, checks their config hashes and writes its own artifact
// plus a run-log entry. The CLI is a thin wrapper over these functions.
#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "devdet/config.hpp"
#include "devdet/daft.hpp"
#include "devdet/data.hpp"
#include "devdet/datagen.hpp"
#include "devdet/dosedict.hpp"
#include "devdet/ffdev.hpp"
#include "devdet/metrics.hpp"
#include "devdet/mining.hpp"

namespace devdet {

struct ArtifactPaths {
  std::filesystem::path root;

  std::filesystem::path data_dir() const { return root / "data"; }
  std::filesystem::path manifest() const { return data_dir() / "manifest.txt"; }
  std::filesystem::path detector() const { return root / "models" / "detector.ckpt"; }
  std::filesystem::path scores() const { return root / "mining" / "scores.tsv"; }
  std::filesystem::path s1_list() const { return root / "mining" / "s1.tsv"; }
  std::filesystem::path generator() const { return root / "models" / "generator.ckpt"; }
  std::filesystem::path dictionary() const { return root / "models" / "dosedict.bin"; }
  std::filesystem::path bundle() const { return root / "models" / "pipeline"; }
  std::filesystem::path reports() const { return root / "reports"; }
  std::filesystem::path eval_report() const { return reports() / "eval.txt"; }
  std::filesystem::path ablate_dir() const { return root / "ablate"; }
  std::filesystem::path run_log() const { return root / "run.log"; }
  std::filesystem::path config() const { return root / "config.json"; }
};

struct Context {
  RunConfig config;
  std::function<void(const std::string&)> progress;  // optional human-readable progress

  ArtifactPaths paths() const { return ArtifactPaths{config.artifact_dir}; }
  void say(const std::string& message) const;
};

// In-domain training split, in-domain test split and every sample of the
// holdout domains.
struct BenchmarkSplits {
  SampleSet train;
  SampleSet test;
  SampleSet holdout;
};

BenchmarkSplits load_benchmark(const Context& ctx);

// Stage-1 id list: "sample_id<TAB>role" lines under a config-hash line.
struct S1Entry {
  std::string sample_id;
  std::string role;  // hard_fake | easy_real | hard_real | all
  friend bool operator==(const S1Entry&, const S1Entry&) = default;
};
std::vector<S1Entry> s1_entries(const ScoreTable& table, const MiningConfig& config);
void write_s1_list(const std::filesystem::path& path, const std::vector<S1Entry>& entries, const std::string& hash);
std::vector<S1Entry> read_s1_list(const std::filesystem::path& path, std::string* hash = nullptr);

// Effect of a trained developer at a fixed dose on the mined sets.
struct DeveloperEffect {
  double hard_fake_before = 0.0;  // mean confidence
  double hard_fake_after = 0.0;
  std::size_t easy_real_total = 0;
  std::size_t easy_real_kept = 0;  // still scored < threshold after developing
  double hard_fake_rise() const { return hard_fake_after - hard_fake_before; }
  double easy_real_kept_fraction() const;
};
DeveloperEffect developer_effect(const Detector& detector, const DevGen& generator, const SampleSet& hard_fake,
                                 const SampleSet& easy_real, double dose, double threshold = 0.5);

struct EvalResult {
  metrics::MetricsReport base_in_domain;
  metrics::MetricsReport base_holdout;
  metrics::MetricsReport pipeline_in_domain;
  metrics::MetricsReport pipeline_holdout;
  std::string text;  // exact bytes of reports/eval.txt
};

std::string eval_text(const EvalResult& result, const std::string& hash);

struct VariantResult {
  std::string name;
  metrics::MetricsReport in_domain;
  metrics::MetricsReport holdout;
};

struct StrategyResult {
  MiningStrategy strategy = MiningStrategy::HF_ER;
  std::size_t s1_size = 0;
  DeveloperEffect effect;
  metrics::MetricsReport in_domain;  // DAFT-S with this strategy's developer
  metrics::MetricsReport holdout;
};

struct AblateOptions {
  bool variants = true;
  bool strategies = true;
  bool include_parallel = true;  // DAFT-P row in the variant grid
};

struct AblateResult {
  std::vector<VariantResult> variants;  // Base, FFDev-only, DFFT, DAFT-S, [DAFT-P]
  std::vector<StrategyResult> strategies;
};

datagen::Manifest cmd_synth(const Context& ctx);
TrainLog cmd_pretrain(const Context& ctx);
MinedIds cmd_mine(const Context& ctx);
Stage1Log cmd_stage1(const Context& ctx);
FitLog cmd_fitdict(const Context& ctx);
void cmd_daft(const Context& ctx);
EvalResult cmd_eval(const Context& ctx);
AblateResult cmd_ablate(const Context& ctx, const AblateOptions& options = {});
// synth, pretrain, mine, stage1, fitdict, daft, eval.
EvalResult cmd_run_all(const Context& ctx);

// Fine-tuning config of the DAFT stage: train config with the scaled rate,
// DAFT epochs and the daft seed.
TrainConfig daft_train_config(const RunConfig& config);

metrics::MetricsReport evaluate(const std::vector<double>& confidences, const SampleSet& set, double threshold);

}  // namespace devdet
