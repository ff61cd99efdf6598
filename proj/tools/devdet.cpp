// devdet: command-line driver for the detection pipeline.
//
//   devdet synth|pretrain|mine|stage1|fitdict|daft|eval|ablate|run-all [options]
//   devdet show-config [--config PATH]
//
// Exit codes: 0 success, 1 other failure, 2 config error, 3 missing or stale
// artifact, 4 numeric failure.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "devdet/config.hpp"
#include "devdet/error.hpp"
#include "devdet/pipeline.hpp"

namespace {

using namespace devdet;

struct Options {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> stage_epochs;
  bool quiet = false;
  std::string grid = "all";
  bool no_parallel = false;
};

// --config, else <out>/config.json left by an earlier command, else defaults.
RunConfig resolve_config(const Options& o) {
  RunConfig c;
  if (!o.config_path.empty()) {
    c = load_run_config(o.config_path);
  } else if (!o.out_dir.empty() && std::filesystem::exists(std::filesystem::path(o.out_dir) / "config.json")) {
    c = load_run_config(std::filesystem::path(o.out_dir) / "config.json");
  } else {
    c = default_run_config();
  }
  if (!o.out_dir.empty()) c.artifact_dir = o.out_dir;
  if (o.seed) {
    c.seed = *o.seed;
    apply_seeds(c);
  }
  return c;
}

// --stage-epochs N sets the epoch count of every stage the command trains.
void apply_stage_epochs(RunConfig& c, const std::string& command, int epochs) {
  const bool all = command == "run-all";
  bool used = false;
  if (all || command == "pretrain") c.train.epochs = epochs, used = true;
  if (all || command == "stage1" || command == "ablate") c.stage1.epochs = epochs, used = true;
  if (all || command == "daft" || command == "ablate") c.daft.epochs = epochs, used = true;
  if (!used) throw ConfigError("--stage-epochs has no effect on `" + command + "`; it applies to training commands");
}

void print_eval(const EvalResult& r) {
  std::printf("%-9s %-10s %8s %8s\n", "model", "split", "S-AUC", "M-ACC");
  std::printf("%-9s %-10s %8.4f %8.4f\n", "base", "in_domain", r.base_in_domain.s_auc, r.base_in_domain.m_acc);
  std::printf("%-9s %-10s %8.4f %8.4f\n", "base", "holdout", r.base_holdout.s_auc, r.base_holdout.m_acc);
  std::printf("%-9s %-10s %8.4f %8.4f\n", "pipeline", "in_domain", r.pipeline_in_domain.s_auc,
              r.pipeline_in_domain.m_acc);
  std::printf("%-9s %-10s %8.4f %8.4f\n", "pipeline", "holdout", r.pipeline_holdout.s_auc, r.pipeline_holdout.m_acc);
}

int run(const std::string& command, const Options& o) {
  if (command == "show-config") {
    std::cout << to_json(resolve_config(o)).dump(2) << '\n';
    return 0;
  }
  RunConfig config = resolve_config(o);
  if (o.stage_epochs) apply_stage_epochs(config, command, *o.stage_epochs);
  if (auto v = validate(config); !v.empty()) throw ConfigError(std::move(v));

  Context ctx{config, {}};
  if (!o.quiet) ctx.progress = [](const std::string& m) { std::fprintf(stderr, "[devdet] %s\n", m.c_str()); };

  if (command == "synth") {
    const auto m = cmd_synth(ctx);
    std::printf("%zu samples, dominance factor %.3f\n", m.records.size(), m.stats.dominance_factor);
  } else if (command == "pretrain") {
    const auto log = cmd_pretrain(ctx);
    std::printf("final epoch loss %.6f\n", log.epoch_loss.empty() ? 0.0 : log.epoch_loss.back());
  } else if (command == "mine") {
    const auto mined = cmd_mine(ctx);
    std::printf("hard fakes %zu, easy reals %zu\n", mined.hard_fake.size(), mined.easy_real.size());
  } else if (command == "stage1") {
    const auto log = cmd_stage1(ctx);
    std::printf("stage-1 loss %.6f -> %.6f\n", log.epoch_loss.front(), log.epoch_loss.back());
  } else if (command == "fitdict") {
    const auto log = cmd_fitdict(ctx);
    std::printf("dictionary fitted in %d rounds%s\n", log.rounds, log.converged ? "" : " (round limit)");
  } else if (command == "daft") {
    cmd_daft(ctx);
    std::printf("pipeline bundle written to %s\n", ctx.paths().bundle().string().c_str());
  } else if (command == "eval") {
    print_eval(cmd_eval(ctx));
  } else if (command == "run-all") {
    print_eval(cmd_run_all(ctx));
  } else if (command == "ablate") {
    AblateOptions a;
    if (o.grid != "all" && o.grid != "variants" && o.grid != "strategies")
      throw ConfigError("--grid must be one of all, variants, strategies");
    a.variants = o.grid != "strategies";
    a.strategies = o.grid != "variants";
    a.include_parallel = !o.no_parallel;
    const AblateResult r = cmd_ablate(ctx, a);
    for (const auto& v : r.variants)
      std::printf("%-12s M-ACC %.4f S-AUC %.4f holdout ACC %.4f\n", v.name.c_str(), v.in_domain.m_acc,
                  v.in_domain.s_auc, v.holdout.m_acc);
    for (const auto& s : r.strategies)
      std::printf("%-12s M-ACC %.4f holdout ACC %.4f HF rise %+.4f ER kept %zu/%zu\n", to_string(s.strategy).c_str(),
                  s.in_domain.m_acc, s.holdout.m_acc, s.effect.hard_fake_rise(), s.effect.easy_real_kept,
                  s.effect.easy_real_total);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-in-domain face-forgery detection pipeline"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "Run config JSON");
    sub->add_option("--out", o.out_dir, "Artifact directory (overrides the config)");
    sub->add_option("--seed", o.seed, "Root seed (overrides the config)");
    sub->add_option("--stage-epochs", o.stage_epochs, "Epoch override for the stages this command trains")
        ->check(CLI::NonNegativeNumber);
    sub->add_flag("-q,--quiet", o.quiet, "No progress output");
  };
  const std::pair<const char*, const char*> commands[] = {
      {"synth", "Render the synthetic benchmark"},
      {"pretrain", "Pretrain the base detector"},
      {"mine", "Score the training set and mine hard fakes / easy reals"},
      {"stage1", "Train the developer on the mined set"},
      {"fitdict", "Fit the dose dictionary on hard-fake features"},
      {"daft", "Dose-adaptive fine-tuning of the detector"},
      {"eval", "Evaluate base detector and pipeline"},
      {"ablate", "Variant and mining-strategy ablation grids"},
      {"run-all", "synth, pretrain, mine, stage1, fitdict, daft, eval"},
      {"show-config", "Print the resolved config as JSON"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common(sub);
    if (std::string(name) == "ablate") {
      sub->add_option("--grid", o.grid, "all | variants | strategies");
      sub->add_flag("--no-parallel", o.no_parallel, "Skip the DAFT-P row");
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, o);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "devdet %s: config error:\n", command.c_str());
    for (const auto& v : e.violations()) std::fprintf(stderr, "  - %s\n", v.c_str());
    return 2;
  } catch (const MissingArtifact& e) {
    std::fprintf(stderr, "devdet %s: %s\n", command.c_str(), e.what());
    return 3;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "devdet %s: numeric failure: %s\n", command.c_str(), e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "devdet %s: %s\n", command.c_str(), e.what());
    return 1;
  }
}
