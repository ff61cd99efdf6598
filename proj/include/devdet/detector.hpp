#pragma once

// Pluggable binary real/fake detector. Everything downstream (mining, the
// developer, the dose dictionary, fine-tuning, evaluation) talks to a model
// only through this interface, so backbones can be swapped freely.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "devdet/data.hpp"
#include "devdet/image.hpp"
#include "devdet/nn/layers.hpp"
#include "devdet/nn/params.hpp"

namespace devdet {

struct Prediction {
  double confidence = 0.5;  // sigmoid of the logit; 1 = fake
  std::vector<double> feature;
};

class Detector {
 public:
  virtual ~Detector() = default;

  virtual std::string architecture_id() const = 0;
  virtual const nn::ParamTable& shape_table() const = 0;
  virtual std::size_t feature_dim() const = 0;
  virtual int image_size() const = 0;
  virtual std::unique_ptr<Detector> clone() const = 0;
  virtual void init_parameters(std::uint64_t seed) = 0;

  // Logit of x. Fills `feature` and, when given, the tape backward() consumes.
  virtual double forward(const Image& x, std::vector<double>* feature, nn::Tape* tape) const = 0;

  // Backpropagates d(loss)/d(logit): parameter gradients are accumulated
  // into dparams (skipped when empty), the input gradient is written to
  // dinput (skipped when null).
  virtual void backward(const nn::Tape& tape, double dlogit, std::span<double> dparams, Image* dinput) const = 0;

  Prediction predict(const Image& x) const;

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  void set_parameters(std::span<const double> values);
  std::uint64_t parameter_hash() const { return nn::hash_parameters(params_); }

 protected:
  void check_input(const Image& x) const;
  std::vector<double> params_;
};

// Architecture ids:
//   convnet-s<size>-c<c1>.<c2>...-h<hidden>   stride-2 conv blocks, GAP, hidden dense, logit
//   mlp-s<size>-h<h1>.<h2>                    flatten, two hidden dense layers, logit
std::unique_ptr<Detector> make_detector(const std::string& architecture_id);

constexpr const char* kDefaultDetectorArch = "convnet-s64-c8.16.32.32-h32";

double sigmoid(double logit);

struct TrainConfig {
  double learning_rate = 2e-4;
  int epochs = 10;
  int batch_size = 32;
  std::uint64_t seed = 0;
  bool augment = true;
  AugmentConfig augmentation;
};

std::vector<std::string> validate(const TrainConfig& config, const std::string& prefix);

struct TrainLog {
  std::vector<double> epoch_loss;  // mean loss of each epoch
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

// Binary cross-entropy training of every detector parameter with Adam.
// Parameters are rounded to float32 at the end. Throws NumericError on NaN.
TrainLog pretrain(Detector& model, const SampleSet& train, const TrainConfig& config, const EpochCallback& on_epoch = {});

// Max relative error between analytic parameter gradients of the mean
// cross-entropy over `batch` and central differences with step `h`.
struct GradientCheck {
  double max_rel_error = 0.0;
  std::vector<double> analytic;
  std::vector<double> numeric;
};
GradientCheck gradient_check(const Detector& model, std::span<const Sample> batch, double h = 1e-5, double loss_scale = 1.0);

// Confidences for a whole set, in set order.
std::vector<double> confidences(const Detector& model, const SampleSet& set);

}  // namespace devdet
