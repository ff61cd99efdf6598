#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "devdet/config.hpp"
#include "devdet/error.hpp"
#include "devdet/pipeline.hpp"

using namespace devdet;
namespace fs = std::filesystem;

namespace {

// Default pipeline shrunk to seconds: 100 images per class at 32 px and a
// couple of epochs per stage.
RunConfig small_config(const fs::path& dir) {
  RunConfig c = default_run_config();
  c.benchmark.images_per_domain_per_class = 100;
  c.benchmark.image_size = 32;
  c.benchmark.stats_samples_per_class = 16;
  c.detector_architecture = "convnet-s32-c4.8.8-h8";
  c.stage1.architecture = "devgen-s32-c4.8.8";
  c.train.epochs = 2;
  c.stage1.epochs = 1;
  c.daft.epochs = 1;
  c.artifact_dir = dir.string();
  return c;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("devdet_test_cli_" + name);
  fs::remove_all(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DEVDET_CLI) + " " + args + " -q > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// One small run-all shared by the cases below.
const fs::path& reference_run() {
  static const fs::path dir = [] {
    const fs::path d = fresh_dir("reference");
    cmd_run_all(Context{small_config(d), {}});
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("run-all writes every artifact and a run-log entry per stage") {
  const fs::path& d = reference_run();
  const ArtifactPaths p{d};
  for (const fs::path& f : {p.manifest(), p.detector(), p.scores(), p.s1_list(), p.generator(), p.dictionary(),
                            p.bundle() / "MANIFEST", p.eval_report(), p.config()})
    CHECK_MESSAGE(fs::exists(f), f.string());
  std::ifstream log(p.run_log());
  std::vector<std::string> commands;
  for (std::string line; std::getline(log, line);)
    commands.push_back(nlohmann::json::parse(line).at("command").get<std::string>());
  CHECK(commands == std::vector<std::string>{"synth", "pretrain", "mine", "stage1", "fitdict", "daft", "eval"});
}

TEST_CASE("eval without retraining reproduces the identical report") {
  const fs::path& d = reference_run();
  const std::string before = slurp(ArtifactPaths{d}.eval_report());
  const EvalResult again = cmd_eval(Context{small_config(d), {}});
  CHECK(again.text == before);
  CHECK(slurp(ArtifactPaths{d}.eval_report()) == before);
}

TEST_CASE("the stage-by-stage sequence and a second run-all match the reference bytes") {
  const fs::path& ref = reference_run();
  const fs::path d = fresh_dir("manual");
  const Context ctx{small_config(d), {}};
  cmd_synth(ctx);
  cmd_pretrain(ctx);
  cmd_mine(ctx);
  cmd_stage1(ctx);
  cmd_fitdict(ctx);
  cmd_daft(ctx);
  cmd_eval(ctx);
  const ArtifactPaths a{ref}, b{d};
  CHECK(slurp(a.eval_report()) == slurp(b.eval_report()));
  CHECK(slurp(a.detector()) == slurp(b.detector()));
  CHECK(slurp(a.generator()) == slurp(b.generator()));
  CHECK(slurp(a.dictionary()) == slurp(b.dictionary()));

  const fs::path d2 = fresh_dir("again");
  cmd_run_all(Context{small_config(d2), {}});
  CHECK(slurp(a.eval_report()) == slurp(ArtifactPaths{d2}.eval_report()));
  CHECK(slurp(a.root / "reports" / "scores.csv") == slurp(ArtifactPaths{d2}.root / "reports" / "scores.csv"));
  fs::remove_all(d);
  fs::remove_all(d2);
}

TEST_CASE("a stage refuses missing or stale upstream artifacts") {
  const fs::path d = fresh_dir("chain");
  const Context ctx{small_config(d), {}};
  CHECK_THROWS_AS(cmd_pretrain(ctx), MissingArtifact);
  cmd_synth(ctx);
  CHECK_THROWS_AS(cmd_mine(ctx), MissingArtifact);
  cmd_pretrain(ctx);
  CHECK_THROWS_AS(cmd_stage1(ctx), MissingArtifact);
  CHECK_THROWS_AS(cmd_fitdict(ctx), MissingArtifact);
  cmd_mine(ctx);
  cmd_stage1(ctx);
  CHECK_THROWS_AS(cmd_daft(ctx), MissingArtifact);
  cmd_fitdict(ctx);
  CHECK_THROWS_AS(cmd_eval(ctx), MissingArtifact);
  cmd_daft(ctx);
  cmd_eval(ctx);

  // Changing the stage-1 config makes the generator and the bundle stale but
  // leaves the detector and the dictionary valid.
  RunConfig changed = ctx.config;
  changed.stage1.lambda_tv *= 2;
  const Context c2{changed, {}};
  CHECK_THROWS_AS(cmd_daft(c2), MissingArtifact);
  CHECK_THROWS_AS(cmd_eval(c2), MissingArtifact);
  CHECK_NOTHROW(cmd_mine(c2));

  // A different pretraining config invalidates everything downstream.
  RunConfig retrained = ctx.config;
  retrained.train.learning_rate *= 2;
  CHECK_THROWS_AS(cmd_mine(Context{retrained, {}}), MissingArtifact);

  // A different benchmark invalidates pretraining.
  RunConfig rebench = ctx.config;
  rebench.benchmark.domains[0].trace_amplitude *= 0.5;
  CHECK_THROWS_AS(cmd_pretrain(Context{rebench, {}}), MissingArtifact);
  RunConfig reseeded = ctx.config;
  reseeded.seed += 1;
  apply_seeds(reseeded);
  CHECK_THROWS_AS(cmd_pretrain(Context{reseeded, {}}), MissingArtifact);
  fs::remove_all(d);
}

TEST_CASE("the parallel DAFT mode does not need a stage-1 generator") {
  const fs::path d = fresh_dir("parallel");
  RunConfig c = small_config(d);
  c.daft.parallel = true;
  const Context ctx{c, {}};
  cmd_synth(ctx);
  cmd_pretrain(ctx);
  cmd_mine(ctx);
  cmd_fitdict(ctx);
  cmd_daft(ctx);
  const EvalResult r = cmd_eval(ctx);
  CHECK(r.pipeline_in_domain.s_auc >= 0.0);
  CHECK_FALSE(fs::exists(ArtifactPaths{d}.generator()));
  fs::remove_all(d);
}

TEST_CASE("ablate with strategy ALL trains the developer on the whole training split") {
  const fs::path& ref = reference_run();
  const Context ctx{small_config(ref), {}};
  AblateOptions opts;
  opts.variants = false;
  const AblateResult r = cmd_ablate(ctx, opts);
  const BenchmarkSplits data = load_benchmark(ctx);
  std::set<std::string> train_ids;
  for (const auto& s : data.train.samples) train_ids.insert(s.sample_id);

  const auto entries = read_s1_list(ArtifactPaths{ref}.ablate_dir() / "s1_ALL.tsv");
  std::set<std::string> all_ids;
  for (const auto& e : entries) all_ids.insert(e.sample_id);
  CHECK(all_ids == train_ids);
  CHECK(entries.size() == train_ids.size());

  REQUIRE(r.strategies.size() == 4);
  CHECK(r.strategies.back().strategy == MiningStrategy::ALL);
  CHECK(r.strategies.back().s1_size == train_ids.size());
  CHECK(r.strategies[1].s1_size < r.strategies[0].s1_size);
  CHECK(r.strategies[0].effect.easy_real_total > 0);
}

TEST_CASE("ablate variant grid has the expected rows") {
  const fs::path& ref = reference_run();
  AblateOptions opts;
  opts.strategies = false;
  const AblateResult r = cmd_ablate(Context{small_config(ref), {}}, opts);
  std::vector<std::string> names;
  for (const auto& v : r.variants) names.push_back(v.name);
  CHECK(names == std::vector<std::string>{"Base", "FFDev-only", "DFFT", "DAFT-S", "DAFT-P"});
  const EvalResult e = cmd_eval(Context{small_config(ref), {}});
  CHECK(r.variants[0].in_domain.m_acc == e.base_in_domain.m_acc);
  CHECK(r.variants[0].holdout.m_acc == e.base_holdout.m_acc);
}

TEST_CASE("CLI exit codes") {
  const fs::path d = fresh_dir("exit");
  fs::create_directories(d);
  const fs::path cfg = d / "small.json";
  save_run_config(small_config(d / "out"), cfg);
  const std::string common = "--config " + cfg.string() + " --out " + (d / "out").string();

  CHECK(run_cli("mine " + common) == 3);
  CHECK(run_cli("synth " + common) == 0);
  CHECK(run_cli("stage1 " + common) == 3);

  std::ofstream(d / "bad.json") << R"({"train": {"epochs": -1}, "stage1": {"dose_epsilon": 3}})";
  CHECK(run_cli("pretrain --config " + (d / "bad.json").string() + " --out " + (d / "out").string()) == 2);
  std::ofstream(d / "broken.json") << "{ not json";
  CHECK(run_cli("synth --config " + (d / "broken.json").string()) == 2);
  CHECK(run_cli("synth " + common + " --stage-epochs 3") == 2);
  CHECK(run_cli("ablate " + common + " --grid nonsense") == 2);
  CHECK(run_cli("no-such-command") == 2);

  // Without --config the command picks up the config an earlier command left in --out.
  CHECK(run_cli("pretrain --out " + (d / "out").string()) == 0);
  CHECK(run_cli("show-config --out " + (d / "out").string()) == 0);
  fs::remove_all(d);
}
