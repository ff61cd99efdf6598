#pragma once
// Stage 2 and inference. A pipeline pairs the fine-tuned detector with the
// frozen generator, the dose dictionary and a frozen copy of the pretrained
// detector used only to compute features for the dose.
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "devdet/detector.hpp"
#include "devdet/dosedict.hpp"
#include "devdet/ffdev.hpp"

namespace devdet {

// none: raw images; fixed: every input gets base_dose; adaptive: dose from the dictionary.
enum class DoseMode { none, fixed, adaptive };

std::string to_string(DoseMode m);
DoseMode parse_dose_mode(const std::string& s);

struct PipelineModel {
  std::unique_ptr<Detector> detector;
  std::shared_ptr<const DevGen> generator;
  std::optional<DoseDictModel> dict;
  std::shared_ptr<const Detector> extractor;
  double base_dose = 0.25;
  DoseMode mode = DoseMode::adaptive;

  PipelineModel clone() const;
  // Throws ContractError when a component the mode needs is absent.
  void check() const;
};

// Detector alone, no developer.
PipelineModel base_pipeline(const Detector& detector);

// Dose the pipeline would apply to x.
double pipeline_dose(const PipelineModel& pipeline, const Image& x);

struct Inference {
  double confidence = 0.0;
  double dose = 0.0;
  Image developed;
};

// Dose, develop, predict.
Inference infer(const PipelineModel& pipeline, const Image& x);
std::vector<double> pipeline_confidences(const PipelineModel& pipeline, const SampleSet& set);

// Every training sample developed with the pipeline's dose (images are not quantized).
SampleSet develop_set(const PipelineModel& pipeline, const SampleSet& set);

// Binary cross-entropy fine-tuning of the detector on developed training
// images; generator, dictionary and extractor stay untouched. Zero epochs
// leaves the detector unchanged.
TrainLog finetune(PipelineModel& pipeline, const SampleSet& train, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

// Joint variant: a fresh generator and the detector are optimized together
// on the training set, each with its own Adam, using the pipeline's dose.
// The trained generator replaces pipeline.generator.
struct ParallelLog {
  std::vector<double> epoch_loss;
};
ParallelLog finetune_parallel(PipelineModel& pipeline, DevGen generator, const SampleSet& train,
                              const TrainConfig& detector_config, const Stage1Config& generator_config,
                              const EpochCallback& on_epoch = {});

// Bundle directory: detector.ckpt, generator.ckpt, dosedict.bin,
// extractor.ckpt and a MANIFEST with their hashes, verified on load.
void save_bundle(const std::string& dir, const PipelineModel& pipeline, const std::string& config_hash);
PipelineModel load_bundle(const std::string& dir, std::string* config_hash = nullptr);

}  // namespace devdet
