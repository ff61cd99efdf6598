#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "devdet/config.hpp"
#include "devdet/error.hpp"

using namespace devdet;
namespace fs = std::filesystem;

TEST_CASE("defaults are valid and round-trip through JSON") {
  const RunConfig c = default_run_config();
  CHECK(validate(c).empty());
  const auto j = to_json(c);
  const RunConfig back = run_config_from_json(nlohmann::json::parse(j.dump()));
  CHECK(to_json(back) == j);
  CHECK(config_hash(back) == config_hash(c));

  const fs::path path = fs::temp_directory_path() / "devdet_test_config.json";
  save_run_config(c, path);
  CHECK(to_json(load_run_config(path)) == j);
  fs::remove(path);
}

TEST_CASE("the shipped default config equals the built-in defaults") {
  const RunConfig shipped = load_run_config(fs::path(DEVDET_SOURCE_DIR) / "configs" / "default.json");
  CHECK(to_json(shipped) == to_json(default_run_config()));
}

TEST_CASE("missing keys keep their defaults") {
  const RunConfig c = run_config_from_json(nlohmann::json::object());
  CHECK(to_json(c) == to_json(default_run_config()));
  const RunConfig d = run_config_from_json({{"stage1", {{"lambda_tv", 0.5}}}});
  CHECK(d.stage1.lambda_tv == 0.5);
  CHECK(d.stage1.dose_epsilon == default_run_config().stage1.dose_epsilon);
}

TEST_CASE("every violation is reported at once") {
  nlohmann::json j = nlohmann::json::parse(to_json(default_run_config()).dump());
  j["bogus"] = 1;
  j["train"]["epochs"] = "ten";
  j["stage1"]["dose_epsilon"] = 2.0;
  j["mining"]["strategy"] = "HF_XX";
  j["daft"]["base_dose"] = -1.0;
  try {
    run_config_from_json(j);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const auto& v = e.violations();
    CHECK(v.size() == 5);
    auto mentions = [&](const std::string& s) {
      return std::any_of(v.begin(), v.end(), [&](const std::string& m) { return m.find(s) != std::string::npos; });
    };
    CHECK(mentions("bogus"));
    CHECK(mentions("train.epochs"));
    CHECK(mentions("dose_epsilon"));
    CHECK(mentions("strategy"));
    CHECK(mentions("base_dose"));
  }
}

TEST_CASE("stage seeds are distinct, deterministic and root-dependent") {
  const StageSeeds a = stage_seeds(7), b = stage_seeds(7), c = stage_seeds(8);
  const std::vector<std::uint64_t> va{a.benchmark, a.detector_init, a.pretrain, a.generator_init,
                                      a.stage1, a.dict, a.daft, a.daft_parallel};
  CHECK(std::set<std::uint64_t>(va.begin(), va.end()).size() == va.size());
  CHECK(a.pretrain == b.pretrain);
  CHECK(a.stage1 == b.stage1);
  CHECK(a.benchmark != c.benchmark);
  CHECK(a.daft != c.daft);

  RunConfig r = default_run_config();
  r.seed = 123;
  apply_seeds(r);
  const StageSeeds s = stage_seeds(123);
  CHECK(r.benchmark.seed == s.benchmark);
  CHECK(r.train.seed == s.pretrain);
  CHECK(r.stage1.seed == s.stage1);
}

TEST_CASE("stage hashes change exactly downstream of an edit") {
  const RunConfig base = default_run_config();
  const StageHashes h0 = stage_hashes(base);
  auto changed = [&](const RunConfig& c) {
    const StageHashes h = stage_hashes(c);
    return std::vector<bool>{h.benchmark != h0.benchmark, h.pretrain != h0.pretrain, h.mine != h0.mine,
                             h.stage1 != h0.stage1,       h.dict != h0.dict,         h.daft != h0.daft,
                             h.eval != h0.eval};
  };
  //                            bench  pre    mine   s1     dict   daft   eval
  RunConfig c = base;
  c.benchmark.image_size = 48;
  CHECK(changed(c) == std::vector<bool>{true, true, true, true, true, true, true});
  c = base;
  c.train.epochs += 1;
  CHECK(changed(c) == std::vector<bool>{false, true, true, true, true, true, true});
  c = base;
  c.mining.easy_real_fraction = 0.2;
  CHECK(changed(c) == std::vector<bool>{false, false, true, true, true, true, true});
  c = base;
  c.stage1.lambda_tv *= 2.0;
  CHECK(changed(c) == std::vector<bool>{false, false, false, true, false, true, true});
  c = base;
  c.dict.lambda_l1 = 0.2;
  CHECK(changed(c) == std::vector<bool>{false, false, false, false, true, true, true});
  c = base;
  c.daft.epochs += 1;
  CHECK(changed(c) == std::vector<bool>{false, false, false, false, false, true, true});
  c = base;
  c.eval.threshold = 0.6;
  CHECK(changed(c) == std::vector<bool>{false, false, false, false, false, false, true});
  c = base;
  c.artifact_dir = "elsewhere";
  CHECK(changed(c) == std::vector<bool>(7, false));
  CHECK(config_hash(c) == config_hash(base));
  c = base;
  c.seed = 8;
  apply_seeds(c);
  CHECK(changed(c) == std::vector<bool>(7, true));
}

TEST_CASE("a parallel daft run does not depend on the stage-1 generator") {
  RunConfig a = default_run_config();
  a.daft.parallel = true;
  RunConfig b = a;
  b.mining.hard_fake_fraction = 0.2;  // changes stage 1 and the dictionary
  RunConfig c = a;
  c.stage1.epochs += 3;  // changes stage 1 only
  CHECK(stage_hashes(a).daft != stage_hashes(b).daft);
  CHECK(stage_hashes(a).stage1 != stage_hashes(c).stage1);
  CHECK(stage_hashes(a).dict == stage_hashes(c).dict);
}

TEST_CASE("invalid benchmark and architecture are reported") {
  RunConfig c = default_run_config();
  c.benchmark.image_size = 8;
  c.detector_architecture = "resnet";
  c.eval.threshold = 1.5;
  const auto v = validate(c);
  CHECK(v.size() >= 3);
}
