#include "devdet/config.hpp"

#include <fstream>
#include <initializer_list>
#include <limits>
#include <set>
#include <sstream>
#include <type_traits>

#include "devdet/error.hpp"
#include "devdet/hash.hpp"
#include "devdet/rng.hpp"

namespace devdet {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

StageSeeds stage_seeds(std::uint64_t root) {
  StageSeeds s;
  s.benchmark = substream(root, "benchmark");
  s.detector_init = substream(root, "detector_init");
  s.pretrain = substream(root, "pretrain");
  s.generator_init = substream(root, "generator_init");
  s.stage1 = substream(root, "stage1");
  s.dict = substream(root, "dict");
  s.daft = substream(root, "daft");
  s.daft_parallel = substream(root, "daft_parallel");
  return s;
}

void apply_seeds(RunConfig& config) {
  const StageSeeds s = stage_seeds(config.seed);
  config.benchmark.seed = s.benchmark;
  config.train.seed = s.pretrain;
  config.stage1.seed = s.stage1;
}

datagen::BenchmarkConfig default_benchmark() {
  using datagen::TextureKind;
  using datagen::TraceKind;
  datagen::BenchmarkConfig c;
  c.images_per_domain_per_class = 200;
  c.image_size = 64;
  c.domains = {
      {0, TextureKind::stripes, {0.75, 0.35, 0.30}, 0.02, 0.08, 0.18, TraceKind::ellipse},
      {1, TextureKind::checker, {0.30, 0.65, 0.35}, 0.02, 0.08, 0.18, TraceKind::ripple},
      {2, TextureKind::blobs, {0.35, 0.35, 0.75}, 0.02, 0.08, 0.10, TraceKind::ellipse},
      {3, TextureKind::speckle, {0.70, 0.70, 0.35}, 0.02, 0.08, 0.09, TraceKind::ripple},
      {4, TextureKind::gradient, {0.55, 0.30, 0.60}, 0.02, 0.08, 0.20, TraceKind::channel_offset},
  };
  c.holdout_domain_ids = {4};
  return c;
}

RunConfig default_run_config() {
  RunConfig c;
  c.seed = 12;
  c.benchmark = default_benchmark();
  c.train.learning_rate = 2e-4;
  c.train.epochs = 35;
  c.train.batch_size = 32;
  c.stage1.learning_rate = 2e-4;
  c.stage1.epochs = 10;
  c.stage1.batch_size = 16;
  c.stage1.lambda_tv = 1e-3;
  c.mining.easy_real_fraction = 0.5;
  c.dict.calib_lo_percentile = 25.0;
  c.dict.calib_hi_percentile = 75.0;
  apply_seeds(c);
  return c;
}

std::vector<std::string> validate(const RunConfig& c) {
  std::vector<std::string> v;
  for (auto& s : datagen::validate(c.benchmark)) v.push_back("benchmark: " + s);
  try {
    make_detector(c.detector_architecture);
  } catch (const Error& e) {
    v.push_back(std::string("detector_architecture: ") + e.what());
  }
  for (auto& s : validate(c.train, "train")) v.push_back(std::move(s));
  for (auto& s : validate(c.mining, "mining")) v.push_back(std::move(s));
  for (auto& s : validate(c.stage1, "stage1")) v.push_back(std::move(s));
  if (c.dict.num_atoms < 0) v.push_back("dict.num_atoms must be >= 0 (0 = automatic)");
  if (!(c.dict.lambda_l1 >= 0.0)) v.push_back("dict.lambda_l1 must be >= 0");
  if (!(c.dict.calib_lo_percentile >= 0.0 && c.dict.calib_hi_percentile <= 100.0 &&
        c.dict.calib_lo_percentile < c.dict.calib_hi_percentile))
    v.push_back("dict calibration percentiles must satisfy 0 <= lo < hi <= 100");
  if (c.dict.max_rounds < 1) v.push_back("dict.max_rounds must be >= 1");
  if (!(c.dict.tolerance > 0.0)) v.push_back("dict.tolerance must be > 0");
  if (!(c.daft.learning_rate_scale > 0.0)) v.push_back("daft.learning_rate_scale must be > 0");
  if (c.daft.epochs < 0) v.push_back("daft.epochs must be >= 0");
  if (!(c.daft.base_dose >= 0.0 && c.daft.base_dose <= 1.0)) v.push_back("daft.base_dose must lie in [0, 1]");
  if (!(c.eval.threshold > 0.0 && c.eval.threshold < 1.0)) v.push_back("eval.threshold must lie in (0, 1)");
  if (c.eval.histogram_bins < 2) v.push_back("eval.histogram_bins must be >= 2");
  return v;
}

namespace {

ojson benchmark_json(const datagen::BenchmarkConfig& b) {
  ojson domains = ojson::array();
  for (const auto& d : b.domains)
    domains.push_back(ojson{{"domain_id", d.domain_id},
                            {"texture", datagen::to_string(d.texture)},
                            {"color_mean", d.color_mean},
                            {"color_jitter", d.color_jitter},
                            {"texture_amplitude", d.texture_amplitude},
                            {"trace_amplitude", d.trace_amplitude},
                            {"trace", datagen::to_string(d.trace)}});
  return ojson{{"domains", domains},
               {"images_per_domain_per_class", b.images_per_domain_per_class},
               {"image_size", b.image_size},
               {"holdout_domain_ids", b.holdout_domain_ids},
               {"train_fraction", b.train_fraction},
               {"val_fraction", b.val_fraction},
               {"stats_samples_per_class", b.stats_samples_per_class}};
}

ojson train_json(const TrainConfig& t) {
  return ojson{{"learning_rate", t.learning_rate},
               {"epochs", t.epochs},
               {"batch_size", t.batch_size},
               {"augment", t.augment},
               {"augmentation",
                ojson{{"flip_probability", t.augmentation.flip_probability},
                      {"brightness_contrast_probability", t.augmentation.brightness_contrast_probability},
                      {"max_brightness", t.augmentation.max_brightness},
                      {"max_contrast", t.augmentation.max_contrast}}}};
}

ojson mining_json(const MiningConfig& m) {
  return ojson{{"k_hard_fake", m.k_hard_fake},
               {"k_easy_real", m.k_easy_real},
               {"hard_fake_fraction", m.hard_fake_fraction},
               {"easy_real_fraction", m.easy_real_fraction},
               {"strategy", to_string(m.strategy)}};
}

ojson stage1_json(const Stage1Config& s) {
  return ojson{{"architecture", s.architecture}, {"dose_epsilon", s.dose_epsilon},
               {"lambda_tv", s.lambda_tv},       {"tv_smoothing_eps", s.tv_smoothing_eps},
               {"learning_rate", s.learning_rate}, {"epochs", s.epochs},
               {"batch_size", s.batch_size}};
}

ojson dict_json(const DictConfig& d) {
  return ojson{{"num_atoms", d.num_atoms},
               {"lambda_l1", d.lambda_l1},
               {"calib_lo_percentile", d.calib_lo_percentile},
               {"calib_hi_percentile", d.calib_hi_percentile},
               {"max_rounds", d.max_rounds},
               {"tolerance", d.tolerance}};
}

ojson daft_json(const DaftConfig& d) {
  return ojson{{"learning_rate_scale", d.learning_rate_scale},
               {"epochs", d.epochs},
               {"base_dose", d.base_dose},
               {"parallel", d.parallel}};
}

ojson eval_json(const EvalConfig& e) {
  return ojson{{"threshold", e.threshold}, {"histogram_bins", e.histogram_bins}};
}

// Collects every problem in a document instead of stopping at the first.
class Reader {
 public:
  std::vector<std::string> violations;

  // Returns false (and records why) when j is not an object; reports unknown keys.
  bool object(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
    if (!j.is_object()) {
      violations.push_back(path + ": expected an object");
      return false;
    }
    std::set<std::string> known(keys.begin(), keys.end());
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!known.count(it.key())) violations.push_back(join(path, it.key()) + ": unknown key");
    return true;
  }

  template <class T>
  void get(const json& j, const std::string& path, const char* key, T& out) {
    auto it = j.find(key);
    if (it == j.end()) return;
    const std::string where = join(path, key);
    if (!matches<T>(*it)) {
      violations.push_back(where + ": expected " + type_name<T>());
      return;
    }
    out = it->template get<T>();
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

 private:
  template <class T>
  static bool matches(const json& v) {
    if constexpr (std::is_same_v<T, bool>) {
      return v.is_boolean();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      return v.is_number_unsigned();
    } else if constexpr (std::is_integral_v<T>) {
      return v.is_number_integer() && v.get<std::int64_t>() >= std::numeric_limits<T>::min() &&
             v.get<std::int64_t>() <= std::numeric_limits<T>::max();
    } else if constexpr (std::is_floating_point_v<T>) {
      return v.is_number();
    } else if constexpr (std::is_same_v<T, std::string>) {
      return v.is_string();
    } else if constexpr (std::is_same_v<T, std::vector<int>>) {
      if (!v.is_array()) return false;
      for (const auto& e : v)
        if (!matches<int>(e)) return false;
      return true;
    } else {
      static_assert(std::is_same_v<T, std::array<double, 3>>);
      if (!v.is_array() || v.size() != 3) return false;
      for (const auto& e : v)
        if (!e.is_number()) return false;
      return true;
    }
  }

  template <class T>
  static std::string type_name() {
    if constexpr (std::is_same_v<T, bool>) return "a boolean";
    else if constexpr (std::is_same_v<T, std::uint64_t>) return "a non-negative integer";
    else if constexpr (std::is_integral_v<T>) return "an integer";
    else if constexpr (std::is_floating_point_v<T>) return "a number";
    else if constexpr (std::is_same_v<T, std::string>) return "a string";
    else if constexpr (std::is_same_v<T, std::vector<int>>) return "an array of integers";
    else return "an array of 3 numbers";
  }
};

void read_benchmark(Reader& r, const json& j, datagen::BenchmarkConfig& b) {
  const std::string p = "benchmark";
  if (!r.object(j, p,
                {"domains", "images_per_domain_per_class", "image_size", "holdout_domain_ids", "train_fraction",
                 "val_fraction", "stats_samples_per_class"}))
    return;
  if (auto it = j.find("domains"); it != j.end()) {
    if (!it->is_array()) {
      r.violations.push_back(p + ".domains: expected an array");
    } else {
      b.domains.assign(it->size(), datagen::DomainSpec{});
      for (std::size_t i = 0; i < it->size(); ++i) {
        const json& d = (*it)[i];
        const std::string dp = p + ".domains[" + std::to_string(i) + "]";
        datagen::DomainSpec& spec = b.domains[i];
        if (!r.object(d, dp,
                      {"domain_id", "texture", "color_mean", "color_jitter", "texture_amplitude", "trace_amplitude",
                       "trace"}))
          continue;
        for (const char* required : {"domain_id", "texture", "color_mean", "trace_amplitude", "trace"})
          if (!d.contains(required)) r.violations.push_back(Reader::join(dp, required) + ": missing");
        r.get(d, dp, "domain_id", spec.domain_id);
        r.get(d, dp, "color_mean", spec.color_mean);
        r.get(d, dp, "color_jitter", spec.color_jitter);
        r.get(d, dp, "texture_amplitude", spec.texture_amplitude);
        r.get(d, dp, "trace_amplitude", spec.trace_amplitude);
        std::string texture = datagen::to_string(spec.texture), trace = datagen::to_string(spec.trace);
        r.get(d, dp, "texture", texture);
        r.get(d, dp, "trace", trace);
        try {
          spec.texture = datagen::texture_from_string(texture);
        } catch (const Error& e) {
          r.violations.push_back(dp + ".texture: " + e.what());
        }
        try {
          spec.trace = datagen::trace_from_string(trace);
        } catch (const Error& e) {
          r.violations.push_back(dp + ".trace: " + e.what());
        }
      }
    }
  }
  r.get(j, p, "images_per_domain_per_class", b.images_per_domain_per_class);
  r.get(j, p, "image_size", b.image_size);
  r.get(j, p, "holdout_domain_ids", b.holdout_domain_ids);
  r.get(j, p, "train_fraction", b.train_fraction);
  r.get(j, p, "val_fraction", b.val_fraction);
  r.get(j, p, "stats_samples_per_class", b.stats_samples_per_class);
}

void read_train(Reader& r, const json& j, TrainConfig& t) {
  const std::string p = "train";
  if (!r.object(j, p, {"learning_rate", "epochs", "batch_size", "augment", "augmentation"})) return;
  r.get(j, p, "learning_rate", t.learning_rate);
  r.get(j, p, "epochs", t.epochs);
  r.get(j, p, "batch_size", t.batch_size);
  r.get(j, p, "augment", t.augment);
  if (auto it = j.find("augmentation"); it != j.end()) {
    const std::string ap = p + ".augmentation";
    if (r.object(*it, ap, {"flip_probability", "brightness_contrast_probability", "max_brightness", "max_contrast"})) {
      r.get(*it, ap, "flip_probability", t.augmentation.flip_probability);
      r.get(*it, ap, "brightness_contrast_probability", t.augmentation.brightness_contrast_probability);
      r.get(*it, ap, "max_brightness", t.augmentation.max_brightness);
      r.get(*it, ap, "max_contrast", t.augmentation.max_contrast);
    }
  }
}

void read_mining(Reader& r, const json& j, MiningConfig& m) {
  const std::string p = "mining";
  if (!r.object(j, p, {"k_hard_fake", "k_easy_real", "hard_fake_fraction", "easy_real_fraction", "strategy"})) return;
  r.get(j, p, "k_hard_fake", m.k_hard_fake);
  r.get(j, p, "k_easy_real", m.k_easy_real);
  r.get(j, p, "hard_fake_fraction", m.hard_fake_fraction);
  r.get(j, p, "easy_real_fraction", m.easy_real_fraction);
  std::string strategy = to_string(m.strategy);
  r.get(j, p, "strategy", strategy);
  try {
    m.strategy = parse_strategy(strategy);
  } catch (const Error& e) {
    r.violations.push_back(p + ".strategy: " + e.what());
  }
}

void read_stage1(Reader& r, const json& j, Stage1Config& s) {
  const std::string p = "stage1";
  if (!r.object(j, p,
                {"architecture", "dose_epsilon", "lambda_tv", "tv_smoothing_eps", "learning_rate", "epochs",
                 "batch_size"}))
    return;
  r.get(j, p, "architecture", s.architecture);
  r.get(j, p, "dose_epsilon", s.dose_epsilon);
  r.get(j, p, "lambda_tv", s.lambda_tv);
  r.get(j, p, "tv_smoothing_eps", s.tv_smoothing_eps);
  r.get(j, p, "learning_rate", s.learning_rate);
  r.get(j, p, "epochs", s.epochs);
  r.get(j, p, "batch_size", s.batch_size);
}

void read_dict(Reader& r, const json& j, DictConfig& d) {
  const std::string p = "dict";
  if (!r.object(j, p,
                {"num_atoms", "lambda_l1", "calib_lo_percentile", "calib_hi_percentile", "max_rounds", "tolerance"}))
    return;
  r.get(j, p, "num_atoms", d.num_atoms);
  r.get(j, p, "lambda_l1", d.lambda_l1);
  r.get(j, p, "calib_lo_percentile", d.calib_lo_percentile);
  r.get(j, p, "calib_hi_percentile", d.calib_hi_percentile);
  r.get(j, p, "max_rounds", d.max_rounds);
  r.get(j, p, "tolerance", d.tolerance);
}

void read_daft(Reader& r, const json& j, DaftConfig& d) {
  const std::string p = "daft";
  if (!r.object(j, p, {"learning_rate_scale", "epochs", "base_dose", "parallel"})) return;
  r.get(j, p, "learning_rate_scale", d.learning_rate_scale);
  r.get(j, p, "epochs", d.epochs);
  r.get(j, p, "base_dose", d.base_dose);
  r.get(j, p, "parallel", d.parallel);
}

void read_eval(Reader& r, const json& j, EvalConfig& e) {
  const std::string p = "eval";
  if (!r.object(j, p, {"threshold", "histogram_bins"})) return;
  r.get(j, p, "threshold", e.threshold);
  r.get(j, p, "histogram_bins", e.histogram_bins);
}

std::string hash_of(const ojson& j) { return hex64(fnv1a64(j.dump())); }

}  // namespace

ojson to_json(const RunConfig& c) {
  return ojson{{"seed", c.seed},
               {"artifact_dir", c.artifact_dir.generic_string()},
               {"benchmark", benchmark_json(c.benchmark)},
               {"detector_architecture", c.detector_architecture},
               {"train", train_json(c.train)},
               {"mining", mining_json(c.mining)},
               {"stage1", stage1_json(c.stage1)},
               {"dict", dict_json(c.dict)},
               {"daft", daft_json(c.daft)},
               {"eval", eval_json(c.eval)}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c = default_run_config();
  Reader r;
  if (r.object(j, "",
               {"seed", "artifact_dir", "benchmark", "detector_architecture", "train", "mining", "stage1", "dict",
                "daft", "eval"})) {
    r.get(j, "", "seed", c.seed);
    std::string dir = c.artifact_dir.generic_string();
    r.get(j, "", "artifact_dir", dir);
    c.artifact_dir = dir;
    r.get(j, "", "detector_architecture", c.detector_architecture);
    if (auto it = j.find("benchmark"); it != j.end()) read_benchmark(r, *it, c.benchmark);
    if (auto it = j.find("train"); it != j.end()) read_train(r, *it, c.train);
    if (auto it = j.find("mining"); it != j.end()) read_mining(r, *it, c.mining);
    if (auto it = j.find("stage1"); it != j.end()) read_stage1(r, *it, c.stage1);
    if (auto it = j.find("dict"); it != j.end()) read_dict(r, *it, c.dict);
    if (auto it = j.find("daft"); it != j.end()) read_daft(r, *it, c.daft);
    if (auto it = j.find("eval"); it != j.end()) read_eval(r, *it, c.eval);
  }
  apply_seeds(c);
  // Fields that failed to parse kept their defaults, so validate() adds no noise.
  for (auto& v : validate(c)) r.violations.push_back(std::move(v));
  if (!r.violations.empty()) throw ConfigError(std::move(r.violations));
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

void save_run_config(const RunConfig& config, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << to_json(config).dump(2) << '\n';
  if (!f) throw IoError("write failed: " + path.string());
}

StageHashes stage_hashes(const RunConfig& c) {
  const StageSeeds seeds = stage_seeds(c.seed);
  StageHashes h;
  h.benchmark = hash_of(ojson{{"benchmark", benchmark_json(c.benchmark)}, {"seed", seeds.benchmark}});
  h.pretrain = hash_of(ojson{{"up", h.benchmark},
                             {"detector_architecture", c.detector_architecture},
                             {"train", train_json(c.train)},
                             {"init_seed", seeds.detector_init},
                             {"seed", seeds.pretrain}});
  h.mine = hash_of(ojson{{"up", h.pretrain}, {"mining", mining_json(c.mining)}});
  h.stage1 = hash_of(ojson{{"up", h.mine},
                           {"stage1", stage1_json(c.stage1)},
                           {"init_seed", seeds.generator_init},
                           {"seed", seeds.stage1}});
  h.dict = hash_of(ojson{{"up", h.mine}, {"dict", dict_json(c.dict)}, {"seed", seeds.dict}});
  // DAFT-P trains its own generator, so its chain skips stage 1.
  h.daft = hash_of(ojson{{"up", c.daft.parallel ? h.dict : h.stage1 + h.dict},
                         {"stage1", stage1_json(c.stage1)},
                         {"daft", daft_json(c.daft)},
                         {"seed", c.daft.parallel ? seeds.daft_parallel : seeds.daft}});
  h.eval = hash_of(ojson{{"up", h.daft}, {"eval", eval_json(c.eval)}});
  return h;
}

std::string config_hash(const RunConfig& c) {
  ojson j = to_json(c);
  j.erase("artifact_dir");
  return hash_of(j);
}

}  // namespace devdet
