#include "devdet/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "devdet/checkpoint.hpp"
#include "devdet/error.hpp"
#include "devdet/hash.hpp"
#include "devdet/plots.hpp"

namespace devdet {

namespace fs = std::filesystem;

void Context::say(const std::string& message) const {
  if (progress) progress(message);
}

namespace {

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  ensure_dir(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

void require(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path))
    throw MissingArtifact("missing " + path.string() + "; run `devdet " + producer + "` first");
}

void check_chain(const fs::path& path, const std::string& actual, const std::string& expected,
                 const std::string& producer) {
  if (actual != expected)
    throw MissingArtifact(path.string() + " was produced by config " + (actual.empty() ? "<none>" : actual) +
                          " but the current config expects " + expected + "; rerun `devdet " + producer + "`");
}

// Config echo embedded into artifacts; location independent.
nlohmann::json echo(const RunConfig& config) {
  auto j = to_json(config);
  j.erase("artifact_dir");
  return nlohmann::json::parse(j.dump());
}

void begin(const Context& ctx, const std::string& command) {
  ctx.say(command + ": config " + config_hash(ctx.config));
}

void log_run(const Context& ctx, const std::string& command, const std::string& stage_hash, std::uint64_t seed,
             const Timer& timer, nlohmann::ordered_json detail = nlohmann::ordered_json::object()) {
  nlohmann::ordered_json entry{{"command", command},
                               {"config_hash", config_hash(ctx.config)},
                               {"stage_hash", stage_hash},
                               {"seed", seed},
                               {"wall_seconds", timer.seconds()},
                               {"detail", std::move(detail)}};
  ensure_dir(ctx.paths().root);
  save_run_config(ctx.config, ctx.paths().config());
  const fs::path path = ctx.paths().run_log();
  std::ofstream f(path, std::ios::binary | std::ios::app);
  if (!f) throw IoError("cannot append to " + path.string());
  f << entry.dump() << '\n';
  ctx.say(command + ": done in " + std::to_string(timer.seconds()) + " s");
}

std::unique_ptr<Detector> load_checked_detector(const Context& ctx) {
  const fs::path path = ctx.paths().detector();
  require(path, "pretrain");
  CheckpointInfo info;
  auto det = load_detector(path.string(), &info);
  check_chain(path, info.config_hash, stage_hashes(ctx.config).pretrain, "pretrain");
  return det;
}

ScoreTable load_checked_scores(const Context& ctx) {
  const fs::path path = ctx.paths().scores();
  require(path, "mine");
  std::string hash;
  ScoreTable table = read_score_table(path.string(), &hash);
  check_chain(path, hash, stage_hashes(ctx.config).mine, "mine");
  return table;
}

DevGen load_checked_generator(const Context& ctx) {
  const fs::path path = ctx.paths().generator();
  require(path, "stage1");
  CheckpointInfo info;
  DevGen gen = load_generator(path.string(), &info);
  check_chain(path, info.config_hash, stage_hashes(ctx.config).stage1, "stage1");
  return gen;
}

DoseDictModel load_checked_dictionary(const Context& ctx, const Detector& extractor) {
  const fs::path path = ctx.paths().dictionary();
  require(path, "fitdict");
  DoseDictModel dict = read_dictionary(path.string());
  check_chain(path, dict.config_hash, stage_hashes(ctx.config).dict, "fitdict");
  if (dict.extractor_hash != hex64(extractor.parameter_hash()))
    throw MissingArtifact(path.string() + " was fitted on a different detector; rerun `devdet fitdict`");
  return dict;
}

std::vector<std::string> ids_with_role(const std::vector<S1Entry>& entries, const std::string& role) {
  std::vector<std::string> ids;
  for (const auto& e : entries)
    if (role.empty() || e.role == role) ids.push_back(e.sample_id);
  return ids;
}

std::vector<std::string> all_ids(const std::vector<S1Entry>& entries) { return ids_with_role(entries, ""); }

PipelineModel adaptive_pipeline(const Detector& detector, std::shared_ptr<const DevGen> generator,
                                 const DoseDictModel& dict, double base_dose) {
  PipelineModel p = base_pipeline(detector);
  p.generator = std::move(generator);
  p.dict = dict;
  p.extractor = std::shared_ptr<const Detector>(detector.clone());
  p.mode = DoseMode::adaptive;
  p.base_dose = base_dose;
  return p;
}

PipelineModel fixed_pipeline(const Detector& detector, std::shared_ptr<const DevGen> generator, double dose) {
  PipelineModel p = base_pipeline(detector);
  p.generator = std::move(generator);
  p.mode = DoseMode::fixed;
  p.base_dose = dose;
  return p;
}

EpochCallback epoch_reporter(const Context& ctx, const std::string& what) {
  return [&ctx, what](int epoch, double loss) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s: epoch %d loss %.6f", what.c_str(), epoch, loss);
    ctx.say(buf);
  };
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string("-"); }

// One line per model: S-AUC, M-ACC and per-domain AUC/F-ACC/R-ACC.
std::string report_row(const std::string& name, const metrics::MetricsReport& in, const metrics::MetricsReport& hold) {
  std::ostringstream out;
  out << name << "\tin_s_auc " << fmt(in.s_auc) << "\tin_m_acc " << fmt(in.m_acc) << "\tholdout_auc "
      << fmt(hold.s_auc) << "\tholdout_acc " << fmt(hold.m_acc);
  for (const auto& [id, dm] : in.per_domain)
    out << "\td" << id << ' ' << fmt_opt(dm.auc) << '/' << fmt_opt(dm.fake_acc) << '/' << fmt_opt(dm.real_acc);
  out << '\n';
  return out.str();
}

void write_figures(const Context& ctx, const std::string& tag, const std::vector<double>& scores,
                   const SampleSet& set, const Eigen::MatrixXd& features) {
  const auto& cfg = ctx.config;
  const fs::path dir = ctx.paths().reports();
  std::vector<int> labels, domains;
  for (const auto& s : set.samples) {
    labels.push_back(s.label);
    domains.push_back(s.domain_id);
  }
  write_ppm((dir / ("hist_" + tag + ".ppm")).string(),
            plots::score_histogram(scores, labels, cfg.eval.histogram_bins, cfg.eval.threshold));
  const Eigen::MatrixXd proj = plots::pca_project(features, 2);
  write_ppm((dir / ("projection_" + tag + ".ppm")).string(), plots::scatter(proj, labels, domains));
  std::ostringstream csv;
  csv << "sample_id,label,domain_id,pc1,pc2\n";
  char buf[64];
  for (std::size_t i = 0; i < set.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g", proj(0, static_cast<Eigen::Index>(i)),
                  proj(1, static_cast<Eigen::Index>(i)));
    csv << set.samples[i].sample_id << ',' << labels[i] << ',' << domains[i] << ',' << buf << '\n';
  }
  write_text(dir / ("projection_" + tag + ".csv"), csv.str());
}

Eigen::MatrixXd features_of(const Detector& detector, const std::vector<Image>& images) {
  Eigen::MatrixXd Z(static_cast<Eigen::Index>(detector.feature_dim()), static_cast<Eigen::Index>(images.size()));
  for (std::size_t i = 0; i < images.size(); ++i)
    Z.col(static_cast<Eigen::Index>(i)) = to_vector(detector.predict(images[i]).feature);
  return Z;
}


}  // namespace

BenchmarkSplits load_benchmark(const Context& ctx) {
  const ArtifactPaths paths = ctx.paths();
  require(paths.manifest(), "synth");
  const datagen::Manifest manifest = datagen::read_manifest(paths.manifest());
  check_chain(paths.manifest(), manifest.config_hash, stage_hashes(ctx.config).benchmark, "synth");
  const SampleSet all = load_manifest(paths.manifest());
  const auto& holdout_ids = ctx.config.benchmark.holdout_domain_ids;
  BenchmarkSplits s;
  s.train = split_of(all, datagen::Split::train, holdout_ids);
  s.test = split_of(all, datagen::Split::test, holdout_ids);
  s.holdout = all.filter("holdout", [&](const Sample& x) {
    return std::find(holdout_ids.begin(), holdout_ids.end(), x.domain_id) != holdout_ids.end();
  });
  return s;
}

std::vector<S1Entry> s1_entries(const ScoreTable& table, const MiningConfig& config) {
  std::vector<S1Entry> out;
  if (config.strategy == MiningStrategy::ALL) {
    for (const auto& id : mine_variant(table, config)) out.push_back({id, "all"});
    return out;
  }
  const MinedIds mined = mine(table, config);
  for (const auto& id : mined.hard_fake) out.push_back({id, "hard_fake"});
  if (config.strategy == MiningStrategy::HF_ER) {
    for (const auto& id : mined.easy_real) out.push_back({id, "easy_real"});
  } else if (config.strategy == MiningStrategy::HF_HR) {
    const auto ids = mine_variant(table, config);
    for (std::size_t i = mined.hard_fake.size(); i < ids.size(); ++i) out.push_back({ids[i], "hard_real"});
  }
  return out;
}

void write_s1_list(const fs::path& path, const std::vector<S1Entry>& entries, const std::string& hash) {
  std::ostringstream out;
  out << "# config_hash " << (hash.empty() ? "-" : hash) << '\n' << "sample_id\trole\n";
  for (const auto& e : entries) out << e.sample_id << '\t' << e.role << '\n';
  write_text(path, out.str());
}

std::vector<S1Entry> read_s1_list(const fs::path& path, std::string* hash) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw LoadError("cannot open " + path.string());
  std::vector<S1Entry> out;
  std::string line;
  int line_no = 0;
  bool header = false;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.rfind("# config_hash ", 0) == 0) {
      const std::string h = line.substr(14);
      if (hash) *hash = h == "-" ? "" : h;
      continue;
    }
    if (!header) {
      if (line != "sample_id\trole") throw LoadError(path.string() + ":" + std::to_string(line_no) + ": bad header");
      header = true;
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || line.find('\t', tab + 1) != std::string::npos)
      throw LoadError(path.string() + ":" + std::to_string(line_no) + ": expected sample_id<TAB>role");
    S1Entry e{line.substr(0, tab), line.substr(tab + 1)};
    if (e.role != "hard_fake" && e.role != "easy_real" && e.role != "hard_real" && e.role != "all")
      throw LoadError(path.string() + ":" + std::to_string(line_no) + ": unknown role '" + e.role + "'");
    out.push_back(std::move(e));
  }
  if (!header) throw LoadError(path.string() + ": no header");
  return out;
}

double DeveloperEffect::easy_real_kept_fraction() const {
  return easy_real_total ? static_cast<double>(easy_real_kept) / static_cast<double>(easy_real_total) : 1.0;
}

DeveloperEffect developer_effect(const Detector& detector, const DevGen& generator, const SampleSet& hard_fake,
                                 const SampleSet& easy_real, double dose, double threshold) {
  DeveloperEffect e;
  for (const auto& s : hard_fake.samples) {
    e.hard_fake_before += detector.predict(*s.image).confidence;
    e.hard_fake_after += detector.predict(apply_developer(*s.image, generator.forward(*s.image), dose)).confidence;
  }
  if (!hard_fake.empty()) {
    e.hard_fake_before /= static_cast<double>(hard_fake.size());
    e.hard_fake_after /= static_cast<double>(hard_fake.size());
  }
  e.easy_real_total = easy_real.size();
  for (const auto& s : easy_real.samples)
    if (detector.predict(apply_developer(*s.image, generator.forward(*s.image), dose)).confidence < threshold)
      ++e.easy_real_kept;
  return e;
}

metrics::MetricsReport evaluate(const std::vector<double>& confidences, const SampleSet& set, double threshold) {
  if (confidences.size() != set.size()) throw ContractError("evaluate: one confidence per sample required");
  std::vector<metrics::ScoredSample> scored;
  scored.reserve(set.size());
  for (std::size_t i = 0; i < set.size(); ++i)
    scored.push_back({confidences[i], set.samples[i].label, set.samples[i].domain_id});
  return metrics::summarize(scored, threshold);
}

TrainConfig daft_train_config(const RunConfig& config) {
  TrainConfig t = config.train;
  t.learning_rate = config.train.learning_rate * config.daft.learning_rate_scale;
  t.epochs = config.daft.epochs;
  t.seed = stage_seeds(config.seed).daft;
  return t;
}

std::string eval_text(const EvalResult& r, const std::string& hash) {
  std::ostringstream out;
  out << "devdet-eval 1\nconfig_hash " << hash << '\n';
  out << "[base in_domain]\n" << metrics::to_text(r.base_in_domain);
  out << "[base holdout]\n" << metrics::to_text(r.base_holdout);
  out << "[pipeline in_domain]\n" << metrics::to_text(r.pipeline_in_domain);
  out << "[pipeline holdout]\n" << metrics::to_text(r.pipeline_holdout);
  return out.str();
}

datagen::Manifest cmd_synth(const Context& ctx) {
  Timer timer;
  begin(ctx, "synth");
  const auto& cfg = ctx.config;
  const std::string hash = stage_hashes(cfg).benchmark;
  datagen::Manifest m = datagen::generate_benchmark(cfg.benchmark, ctx.paths().data_dir(), hash);
  log_run(ctx, "synth", hash, cfg.benchmark.seed, timer,
          {{"samples", m.records.size()}, {"dominance_factor", m.stats.dominance_factor}});
  return m;
}

TrainLog cmd_pretrain(const Context& ctx) {
  Timer timer;
  begin(ctx, "pretrain");
  const auto& cfg = ctx.config;
  const BenchmarkSplits data = load_benchmark(ctx);
  const StageSeeds seeds = stage_seeds(cfg.seed);
  auto det = make_detector(cfg.detector_architecture);
  det->init_parameters(seeds.detector_init);
  const TrainLog log = pretrain(*det, data.train, cfg.train, epoch_reporter(ctx, "pretrain"));
  const std::string hash = stage_hashes(cfg).pretrain;
  CheckpointInfo info{"detector", det->architecture_id(), seeds.detector_init, hash, echo(cfg), {}};
  ensure_dir(ctx.paths().detector().parent_path());
  save_detector(ctx.paths().detector().string(), *det, info);
  log_run(ctx, "pretrain", hash, cfg.train.seed, timer, {{"epoch_loss", log.epoch_loss}});
  return log;
}

MinedIds cmd_mine(const Context& ctx) {
  Timer timer;
  begin(ctx, "mine");
  const auto& cfg = ctx.config;
  const BenchmarkSplits data = load_benchmark(ctx);
  const auto det = load_checked_detector(ctx);
  const ScoreTable table = score_table(*det, data.train);
  const std::string hash = stage_hashes(cfg).mine;
  ensure_dir(ctx.paths().scores().parent_path());
  write_score_table(ctx.paths().scores().string(), table, hash);
  const auto entries = s1_entries(table, cfg.mining);
  write_s1_list(ctx.paths().s1_list(), entries, hash);
  MinedIds mined = mine(table, cfg.mining);
  log_run(ctx, "mine", hash, cfg.seed, timer,
          {{"strategy", to_string(cfg.mining.strategy)},
           {"hard_fake", mined.hard_fake.size()},
           {"easy_real", mined.easy_real.size()},
           {"s1", entries.size()}});
  return mined;
}

Stage1Log cmd_stage1(const Context& ctx) {
  Timer timer;
  begin(ctx, "stage1");
  const auto& cfg = ctx.config;
  const StageHashes hashes = stage_hashes(cfg);
  const StageSeeds seeds = stage_seeds(cfg.seed);
  const BenchmarkSplits data = load_benchmark(ctx);
  const auto det = load_checked_detector(ctx);
  require(ctx.paths().s1_list(), "mine");
  std::string list_hash;
  const auto entries = read_s1_list(ctx.paths().s1_list(), &list_hash);
  check_chain(ctx.paths().s1_list(), list_hash, hashes.mine, "mine");
  const SampleSet s1 = select_ids(data.train, all_ids(entries), "s1");

  DevGen gen(cfg.stage1.architecture);
  gen.init_parameters(seeds.generator_init);
  const Stage1Log log = train_stage1(gen, *det, s1, cfg.stage1, epoch_reporter(ctx, "stage1"));
  CheckpointInfo info{"generator", gen.architecture_id(), seeds.generator_init, hashes.stage1, echo(cfg), {}};
  ensure_dir(ctx.paths().generator().parent_path());
  save_generator(ctx.paths().generator().string(), gen, info);

  const SampleSet hf = select_ids(data.train, ids_with_role(entries, "hard_fake"), "hard_fake");
  const SampleSet er = select_ids(data.train, ids_with_role(entries, "easy_real"), "easy_real");
  const DeveloperEffect effect = developer_effect(*det, gen, hf, er, cfg.stage1.dose_epsilon, cfg.eval.threshold);
  std::ostringstream rep;
  rep << "devdet-stage1 1\nconfig_hash " << hashes.stage1 << '\n'
      << "hard_fake_confidence_before " << fmt(effect.hard_fake_before) << '\n'
      << "hard_fake_confidence_after " << fmt(effect.hard_fake_after) << '\n'
      << "easy_real_kept " << effect.easy_real_kept << '/' << effect.easy_real_total << '\n';
  for (std::size_t e = 0; e < log.epoch_loss.size(); ++e)
    rep << "epoch " << e << " loss " << fmt(log.epoch_loss[e]) << " dev " << fmt(log.epoch_dev[e]) << " tv "
        << fmt(log.epoch_tv[e]) << '\n';
  write_text(ctx.paths().reports() / "stage1.txt", rep.str());
  log_run(ctx, "stage1", hashes.stage1, cfg.stage1.seed, timer,
          {{"epoch_loss", log.epoch_loss},
           {"hard_fake_rise", effect.hard_fake_rise()},
           {"easy_real_kept_fraction", effect.easy_real_kept_fraction()}});
  return log;
}

FitLog cmd_fitdict(const Context& ctx) {
  Timer timer;
  begin(ctx, "fitdict");
  const auto& cfg = ctx.config;
  const StageHashes hashes = stage_hashes(cfg);
  const BenchmarkSplits data = load_benchmark(ctx);
  const auto det = load_checked_detector(ctx);
  const ScoreTable table = load_checked_scores(ctx);
  const SampleSet hf = select_ids(data.train, mine(table, cfg.mining).hard_fake, "hard_fake");

  const Eigen::MatrixXd Z = feature_matrix(*det, hf);
  const double scale = unit_mean_norm_scale(Z);
  const int atoms = cfg.dict.num_atoms > 0 ? cfg.dict.num_atoms : default_num_atoms(static_cast<std::size_t>(Z.cols()));
  FitOptions opts;
  opts.max_rounds = cfg.dict.max_rounds;
  opts.tolerance = cfg.dict.tolerance;
  FitLog log;
  DoseDictModel dict = fit(Z * scale, atoms, cfg.dict.lambda_l1, stage_seeds(cfg.seed).dict, opts, &log);
  dict.feature_scale = scale;
  calibrate(dict, feature_matrix(*det, data.train), cfg.dict.calib_lo_percentile, cfg.dict.calib_hi_percentile);
  dict.extractor_hash = hex64(det->parameter_hash());
  dict.config_hash = hashes.dict;
  ensure_dir(ctx.paths().dictionary().parent_path());
  write_dictionary(ctx.paths().dictionary().string(), dict);
  for (const auto& w : log.warnings) ctx.say("fitdict: warning: " + w);
  log_run(ctx, "fitdict", hashes.dict, stage_seeds(cfg.seed).dict, timer,
          {{"num_atoms", atoms},
           {"rounds", log.rounds},
           {"converged", log.converged},
           {"fallback_rounds", log.fallback_rounds},
           {"calib_lo", dict.calib_lo},
           {"calib_hi", dict.calib_hi}});
  return log;
}

void cmd_daft(const Context& ctx) {
  Timer timer;
  begin(ctx, "daft");
  const auto& cfg = ctx.config;
  const StageHashes hashes = stage_hashes(cfg);
  const StageSeeds seeds = stage_seeds(cfg.seed);
  const BenchmarkSplits data = load_benchmark(ctx);
  const auto det = load_checked_detector(ctx);
  const DoseDictModel dict = load_checked_dictionary(ctx, *det);
  const TrainConfig tcfg = daft_train_config(cfg);
  nlohmann::ordered_json detail;
  PipelineModel p;
  if (cfg.daft.parallel) {
    p = adaptive_pipeline(*det, nullptr, dict, cfg.daft.base_dose);
    DevGen gen(cfg.stage1.architecture);
    gen.init_parameters(seeds.daft_parallel);
    Stage1Config gcfg = cfg.stage1;
    gcfg.seed = seeds.daft_parallel;
    const ParallelLog log = finetune_parallel(p, std::move(gen), data.train, tcfg, gcfg, epoch_reporter(ctx, "daft-p"));
    detail["mode"] = "parallel";
    detail["epoch_loss"] = log.epoch_loss;
  } else {
    p = adaptive_pipeline(*det, std::make_shared<const DevGen>(load_checked_generator(ctx)), dict, cfg.daft.base_dose);
    const TrainLog log = finetune(p, data.train, tcfg, epoch_reporter(ctx, "daft"));
    detail["mode"] = "sequential";
    detail["epoch_loss"] = log.epoch_loss;
  }
  save_bundle(ctx.paths().bundle().string(), p, hashes.daft);
  log_run(ctx, "daft", hashes.daft, tcfg.seed, timer, std::move(detail));
}

EvalResult cmd_eval(const Context& ctx) {
  Timer timer;
  begin(ctx, "eval");
  const auto& cfg = ctx.config;
  const StageHashes hashes = stage_hashes(cfg);
  const BenchmarkSplits data = load_benchmark(ctx);
  const auto det = load_checked_detector(ctx);
  const fs::path bundle = ctx.paths().bundle();
  require(bundle / "MANIFEST", "daft");
  std::string bundle_hash;
  const PipelineModel p = load_bundle(bundle.string(), &bundle_hash);
  check_chain(bundle, bundle_hash, hashes.daft, "daft");
  if (!p.extractor || p.extractor->parameter_hash() != det->parameter_hash())
    throw MissingArtifact(bundle.string() + " was built on a different detector; rerun `devdet daft`");

  const PipelineModel base = base_pipeline(*det);
  const double tau = cfg.eval.threshold;
  EvalResult r;
  std::ostringstream csv;
  csv << "set,sample_id,label,domain_id,base_confidence,pipeline_confidence,dose\n";
  auto run = [&](const SampleSet& set, const std::string& tag, metrics::MetricsReport& base_rep,
                 metrics::MetricsReport& pipe_rep) {
    std::vector<double> base_conf, pipe_conf;
    std::vector<Image> developed;
    char buf[96];
    for (const auto& s : set.samples) {
      base_conf.push_back(det->predict(*s.image).confidence);
      Inference inf = infer(p, *s.image);
      pipe_conf.push_back(inf.confidence);
      std::snprintf(buf, sizeof buf, "%.9f,%.9f,%.9f", base_conf.back(), inf.confidence, inf.dose);
      csv << tag << ',' << s.sample_id << ',' << s.label << ',' << s.domain_id << ',' << buf << '\n';
      developed.push_back(std::move(inf.developed));
    }
    base_rep = evaluate(base_conf, set, tau);
    pipe_rep = evaluate(pipe_conf, set, tau);
    if (tag == "in_domain") {
      std::vector<Image> raw;
      for (const auto& s : set.samples) raw.push_back(*s.image);
      write_figures(ctx, "base", base_conf, set, features_of(*det, raw));
      write_figures(ctx, "pipeline", pipe_conf, set, features_of(*p.detector, developed));
    }
  };
  ensure_dir(ctx.paths().reports());
  run(data.test, "in_domain", r.base_in_domain, r.pipeline_in_domain);
  run(data.holdout, "holdout", r.base_holdout, r.pipeline_holdout);
  r.text = eval_text(r, hashes.eval);
  write_text(ctx.paths().eval_report(), r.text);
  write_text(ctx.paths().reports() / "scores.csv", csv.str());
  log_run(ctx, "eval", hashes.eval, cfg.seed, timer,
          {{"base_m_acc", r.base_in_domain.m_acc},
           {"pipeline_m_acc", r.pipeline_in_domain.m_acc},
           {"base_s_auc", r.base_in_domain.s_auc},
           {"pipeline_s_auc", r.pipeline_in_domain.s_auc},
           {"base_holdout_acc", r.base_holdout.m_acc},
           {"pipeline_holdout_acc", r.pipeline_holdout.m_acc}});
  return r;
}

AblateResult cmd_ablate(const Context& ctx, const AblateOptions& options) {
  Timer timer;
  begin(ctx, "ablate");
  const auto& cfg = ctx.config;
  const StageSeeds seeds = stage_seeds(cfg.seed);
  const double tau = cfg.eval.threshold;
  const BenchmarkSplits data = load_benchmark(ctx);
  const auto det = load_checked_detector(ctx);
  const ScoreTable table = load_checked_scores(ctx);
  const DoseDictModel dict = load_checked_dictionary(ctx, *det);
  const TrainConfig tcfg = daft_train_config(cfg);
  const fs::path dir = ctx.paths().ablate_dir();
  ensure_dir(dir);
  AblateResult result;

  auto score = [&](const std::string& name, const PipelineModel& p) {
    VariantResult v{name, evaluate(pipeline_confidences(p, data.test), data.test, tau),
                    evaluate(pipeline_confidences(p, data.holdout), data.holdout, tau)};
    ctx.say("ablate: " + name + " M-ACC " + fmt(v.in_domain.m_acc) + " holdout ACC " + fmt(v.holdout.m_acc));
    return v;
  };

  if (options.variants) {
    const auto gen = std::make_shared<const DevGen>(load_checked_generator(ctx));
    result.variants.push_back(score("Base", base_pipeline(*det)));
    PipelineModel ffdev = fixed_pipeline(*det, gen, cfg.daft.base_dose);
    result.variants.push_back(score("FFDev-only", ffdev));
    PipelineModel dfft = ffdev.clone();
    finetune(dfft, data.train, tcfg, epoch_reporter(ctx, "ablate DFFT"));
    result.variants.push_back(score("DFFT", dfft));
    PipelineModel daft_s = adaptive_pipeline(*det, gen, dict, cfg.daft.base_dose);
    finetune(daft_s, data.train, tcfg, epoch_reporter(ctx, "ablate DAFT-S"));
    result.variants.push_back(score("DAFT-S", daft_s));
    if (options.include_parallel) {
      PipelineModel daft_p = adaptive_pipeline(*det, nullptr, dict, cfg.daft.base_dose);
      DevGen fresh(cfg.stage1.architecture);
      fresh.init_parameters(seeds.daft_parallel);
      Stage1Config gcfg = cfg.stage1;
      gcfg.seed = seeds.daft_parallel;
      finetune_parallel(daft_p, std::move(fresh), data.train, tcfg, gcfg, epoch_reporter(ctx, "ablate DAFT-P"));
      result.variants.push_back(score("DAFT-P", daft_p));
    }
    std::string text = "devdet-ablate-variants 1\nconfig_hash " + config_hash(cfg) + '\n';
    for (const auto& v : result.variants) text += report_row(v.name, v.in_domain, v.holdout);
    write_text(dir / "variants.txt", text);
  }

  if (options.strategies) {
    const MinedIds main_mined = mine(table, cfg.mining);
    const SampleSet hf = select_ids(data.train, main_mined.hard_fake, "hard_fake");
    const SampleSet er = select_ids(data.train, main_mined.easy_real, "easy_real");
    std::string text = "devdet-ablate-strategies 1\nconfig_hash " + config_hash(cfg) + '\n';
    for (MiningStrategy s : {MiningStrategy::HF_ER, MiningStrategy::HF_only, MiningStrategy::HF_HR, MiningStrategy::ALL}) {
      RunConfig variant = cfg;
      variant.mining.strategy = s;
      const StageHashes vh = stage_hashes(variant);
      const auto entries = s1_entries(table, variant.mining);
      write_s1_list(dir / ("s1_" + to_string(s) + ".tsv"), entries, vh.mine);
      const SampleSet s1 = select_ids(data.train, all_ids(entries), "s1_" + to_string(s));
      DevGen gen(cfg.stage1.architecture);
      gen.init_parameters(seeds.generator_init);
      train_stage1(gen, *det, s1, cfg.stage1, epoch_reporter(ctx, "ablate stage1 " + to_string(s)));
      save_generator((dir / ("generator_" + to_string(s) + ".ckpt")).string(), gen,
                     CheckpointInfo{"generator", gen.architecture_id(), seeds.generator_init, vh.stage1, echo(variant), {}});
      StrategyResult row;
      row.strategy = s;
      row.s1_size = s1.size();
      row.effect = developer_effect(*det, gen, hf, er, cfg.stage1.dose_epsilon, tau);
      PipelineModel p = adaptive_pipeline(*det, std::make_shared<const DevGen>(std::move(gen)), dict, cfg.daft.base_dose);
      finetune(p, data.train, tcfg, epoch_reporter(ctx, "ablate DAFT-S " + to_string(s)));
      row.in_domain = evaluate(pipeline_confidences(p, data.test), data.test, tau);
      row.holdout = evaluate(pipeline_confidences(p, data.holdout), data.holdout, tau);
      ctx.say("ablate: strategy " + to_string(s) + " M-ACC " + fmt(row.in_domain.m_acc));
      std::string line = report_row(to_string(s), row.in_domain, row.holdout);
      line.pop_back();
      text += line + "\ts1_size " + std::to_string(row.s1_size) + "\thf_rise " + fmt(row.effect.hard_fake_rise()) +
              "\ter_kept " + std::to_string(row.effect.easy_real_kept) + '/' +
              std::to_string(row.effect.easy_real_total) + '\n';
      result.strategies.push_back(std::move(row));
    }
    write_text(dir / "strategies.txt", text);
  }
  log_run(ctx, "ablate", config_hash(cfg), cfg.seed, timer,
          {{"variants", result.variants.size()}, {"strategies", result.strategies.size()}});
  return result;
}

EvalResult cmd_run_all(const Context& ctx) {
  cmd_synth(ctx);
  cmd_pretrain(ctx);
  cmd_mine(ctx);
  cmd_stage1(ctx);
  cmd_fitdict(ctx);
  cmd_daft(ctx);
  return cmd_eval(ctx);
}

}  // namespace devdet
