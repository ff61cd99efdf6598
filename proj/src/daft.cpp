#include "devdet/daft.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <algorithm>
#include <map>
#include <sstream>

#include "devdet/checkpoint.hpp"
#include "devdet/error.hpp"
#include "devdet/hash.hpp"
#include "devdet/loss.hpp"
#include "devdet/nn/adam.hpp"

namespace devdet {

std::string to_string(DoseMode m) {
  switch (m) {
    case DoseMode::none: return "none";
    case DoseMode::fixed: return "fixed";
    case DoseMode::adaptive: return "adaptive";
  }
  return "?";
}

DoseMode parse_dose_mode(const std::string& s) {
  for (auto m : {DoseMode::none, DoseMode::fixed, DoseMode::adaptive})
    if (to_string(m) == s) return m;
  throw ConfigError("unknown dose mode '" + s + "'");
}

PipelineModel PipelineModel::clone() const {
  PipelineModel p;
  p.detector = detector ? detector->clone() : nullptr;
  p.generator = generator;
  p.dict = dict;
  p.extractor = extractor;
  p.base_dose = base_dose;
  p.mode = mode;
  return p;
}

void PipelineModel::check() const {
  if (!detector) throw ContractError("pipeline has no detector");
  if (mode == DoseMode::none) return;
  if (!generator) throw ContractError("pipeline dose mode '" + to_string(mode) + "' needs a generator");
  if (!(base_dose >= 0.0)) throw ContractError("pipeline base dose must be >= 0");
  if (mode == DoseMode::adaptive && (!dict || !extractor))
    throw ContractError("adaptive dose needs a dictionary and a feature extractor");
}

PipelineModel base_pipeline(const Detector& detector) {
  PipelineModel p;
  p.detector = detector.clone();
  p.mode = DoseMode::none;
  p.base_dose = 0.0;
  return p;
}

double pipeline_dose(const PipelineModel& p, const Image& x) {
  switch (p.mode) {
    case DoseMode::none: return 0.0;
    case DoseMode::fixed: return p.base_dose;
    case DoseMode::adaptive: return adaptive_dose(*p.dict, to_vector(p.extractor->predict(x).feature), p.base_dose);
  }
  return 0.0;
}

Inference infer(const PipelineModel& p, const Image& x) {
  p.check();
  Inference out;
  out.dose = pipeline_dose(p, x);
  out.developed = p.mode == DoseMode::none ? x : apply_developer(x, p.generator->forward(x), out.dose);
  out.confidence = p.detector->predict(out.developed).confidence;
  return out;
}

std::vector<double> pipeline_confidences(const PipelineModel& p, const SampleSet& set) {
  std::vector<double> out;
  out.reserve(set.size());
  for (const auto& s : set.samples) out.push_back(infer(p, *s.image).confidence);
  return out;
}

SampleSet develop_set(const PipelineModel& p, const SampleSet& set) {
  p.check();
  SampleSet out;
  out.name = set.name + "_developed";
  out.samples.reserve(set.size());
  for (const auto& s : set.samples) {
    Sample d = s;
    if (p.mode != DoseMode::none) {
      const double dose = pipeline_dose(p, *s.image);
      d.image = std::make_shared<const Image>(apply_developer(*s.image, p.generator->forward(*s.image), dose));
    }
    out.samples.push_back(std::move(d));
  }
  return out;
}

TrainLog finetune(PipelineModel& p, const SampleSet& train, const TrainConfig& config, const EpochCallback& on_epoch) {
  p.check();
  if (config.epochs == 0) return {};
  const std::uint64_t gen_hash = p.generator ? p.generator->parameter_hash() : 0;
  const std::uint64_t ext_hash = p.extractor ? p.extractor->parameter_hash() : 0;
  TrainLog log = pretrain(*p.detector, develop_set(p, train), config, on_epoch);
  if ((p.generator && p.generator->parameter_hash() != gen_hash) || (p.extractor && p.extractor->parameter_hash() != ext_hash))
    throw ContractError("frozen pipeline component changed during fine-tuning");
  return log;
}

ParallelLog finetune_parallel(PipelineModel& p, DevGen gen, const SampleSet& train, const TrainConfig& dcfg,
                              const Stage1Config& gcfg, const EpochCallback& on_epoch) {
  if (p.mode == DoseMode::none) throw ContractError("joint training needs a dose mode other than none");
  if (auto v = validate(dcfg, "daft"); !v.empty()) throw ConfigError(std::move(v));
  if (auto v = validate(gcfg, "stage1"); !v.empty()) throw ConfigError(std::move(v));
  if (train.empty()) throw ContractError("joint training set is empty");
  p.generator = std::make_shared<const DevGen>(gen);  // satisfies check(); replaced below
  p.check();

  // Doses depend only on the frozen extractor, so they are computed once on the raw images.
  std::vector<double> doses;
  doses.reserve(train.size());
  for (const auto& s : train.samples) doses.push_back(pipeline_dose(p, *s.image));

  Detector& det = *p.detector;
  nn::Adam det_adam(det.parameters().size(), dcfg.learning_rate);
  nn::Adam gen_adam(gen.parameters().size(), gcfg.learning_rate);
  std::vector<double> det_grad(det.parameters().size()), gen_grad(gen.parameters().size());
  ParallelLog log;
  nn::Tape tape;
  for (int epoch = 0; epoch < dcfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (const auto& batch : epoch_batches(train.size(), static_cast<std::size_t>(dcfg.batch_size), dcfg.seed, epoch)) {
      std::fill(det_grad.begin(), det_grad.end(), 0.0);
      std::fill(gen_grad.begin(), gen_grad.end(), 0.0);
      const double inv = 1.0 / static_cast<double>(batch.size());
      for (std::size_t idx : batch) {
        const Sample& s = train.samples[idx];
        const Image x = dcfg.augment ? augment(*s.image, dcfg.augmentation, dcfg.seed, epoch, s.sample_id) : *s.image;
        const Image delta = gen.forward(x, &tape);
        Image ddelta(delta.height, delta.width, 0.0);
        const DevelopedLoss l = developed_loss(det, x, delta, doses[idx], s.label, gcfg.lambda_tv, gcfg.tv_smoothing_eps,
                                               inv, &ddelta, det_grad);
        loss_sum += l.total(gcfg.lambda_tv);
        gen.backward(tape, ddelta, gen_grad);
      }
      det_adam.step(det.parameters(), det_grad);
      gen_adam.step(gen.parameters(), gen_grad);
    }
    const double mean = loss_sum / static_cast<double>(train.size());
    if (!std::isfinite(mean) || !nn::all_finite(det.parameters()) || !nn::all_finite(gen.parameters()))
      throw NumericError("non-finite loss in joint training epoch " + std::to_string(epoch + 1) +
                         "; try smaller learning rates");
    log.epoch_loss.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  nn::round_to_float(det.parameters());
  nn::round_to_float(gen.parameters());
  p.generator = std::make_shared<const DevGen>(std::move(gen));
  return log;
}

namespace {

constexpr const char* kBundleMagic = "DEVDET-BUNDLE 1";
const char* const kParts[] = {"detector.ckpt", "generator.ckpt", "dosedict.bin", "extractor.ckpt"};

}  // namespace

void save_bundle(const std::string& dir, const PipelineModel& p, const std::string& config_hash) {
  p.check();
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path root(dir);
  CheckpointInfo info;
  info.config_hash = config_hash;
  save_detector((root / "detector.ckpt").string(), *p.detector, info);
  std::vector<std::string> parts{"detector.ckpt"};
  if (p.generator) {
    save_generator((root / "generator.ckpt").string(), *p.generator, info);
    parts.push_back("generator.ckpt");
  }
  if (p.dict) {
    DoseDictModel d = *p.dict;
    d.config_hash = config_hash;
    write_dictionary((root / "dosedict.bin").string(), d);
    parts.push_back("dosedict.bin");
  }
  if (p.extractor) {
    save_detector((root / "extractor.ckpt").string(), *p.extractor, info);
    parts.push_back("extractor.ckpt");
  }
  std::ofstream out(root / "MANIFEST");
  if (!out) throw IoError("cannot write " + (root / "MANIFEST").string());
  out << kBundleMagic << '\n'
      << "config_hash " << (config_hash.empty() ? "-" : config_hash) << '\n'
      << "dose_mode " << to_string(p.mode) << '\n';
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", p.base_dose);
  out << "base_dose " << buf << '\n';
  for (const auto& part : parts) out << "file " << part << ' ' << hex64(hash_file((root / part).string())) << '\n';
  if (!out) throw IoError("failed writing bundle manifest in " + dir);
}

PipelineModel load_bundle(const std::string& dir, std::string* config_hash) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  const fs::path manifest = root / "MANIFEST";
  std::ifstream in(manifest);
  if (!in) throw MissingArtifact("pipeline bundle manifest " + manifest.string() + " not found");
  std::string line;
  if (!std::getline(in, line) || line != kBundleMagic) throw LoadError(manifest.string() + ": not a bundle manifest");
  PipelineModel p;
  std::map<std::string, std::string> hashes;
  std::string chash;
  while (std::getline(in, line)) {
    std::istringstream f(line);
    std::string key;
    f >> key;
    if (key == "config_hash") {
      f >> chash;
      if (chash == "-") chash.clear();
    } else if (key == "dose_mode") {
      std::string m;
      f >> m;
      p.mode = parse_dose_mode(m);
    } else if (key == "base_dose") {
      f >> p.base_dose;
    } else if (key == "file") {
      std::string name, h;
      f >> name >> h;
      hashes[name] = h;
    } else if (!key.empty()) {
      throw LoadError(manifest.string() + ": unknown key '" + key + "'");
    }
  }
  for (const auto& [name, h] : hashes) {
    if (std::find(std::begin(kParts), std::end(kParts), name) == std::end(kParts))
      throw LoadError(manifest.string() + ": unexpected bundle file " + name);
    const std::string actual = hex64(hash_file((root / name).string()));
    if (actual != h) throw LoadError("bundle file " + (root / name).string() + " hash " + actual + " does not match manifest " + h);
  }
  if (!hashes.count("detector.ckpt")) throw LoadError(manifest.string() + ": bundle lacks detector.ckpt");
  p.detector = load_detector((root / "detector.ckpt").string());
  if (hashes.count("generator.ckpt"))
    p.generator = std::make_shared<const DevGen>(load_generator((root / "generator.ckpt").string()));
  if (hashes.count("dosedict.bin")) p.dict = read_dictionary((root / "dosedict.bin").string());
  if (hashes.count("extractor.ckpt")) p.extractor = std::shared_ptr<const Detector>(load_detector((root / "extractor.ckpt").string()));
  p.check();
  if (p.dict && p.extractor && !p.dict->extractor_hash.empty() && p.dict->extractor_hash != hex64(p.extractor->parameter_hash()))
    throw LoadError("bundle dictionary was fitted on a different feature extractor");
  if (config_hash) *config_hash = chash;
  return p;
}

}  // namespace devdet
