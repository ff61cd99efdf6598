#pragma once
// Stage 1: the developer generator G and its training against a frozen
// detector. A developed image is x~ = clamp(x + dose * G(x), 0, 1).
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "devdet/checkpoint.hpp"
#include "devdet/data.hpp"
#include "devdet/detector.hpp"
#include "devdet/image.hpp"
#include "devdet/nn/layers.hpp"
#include "devdet/nn/params.hpp"

namespace devdet {

// devgen-s<size>-c<c1>.<c2>.<c3>: three stride-2 encoder blocks, three
// upsampling decoder blocks each concatenating the matching skip (the last
// one the input image), tanh output.
constexpr const char* kDefaultGeneratorArch = "devgen-s64-c8.16.16";

class DevGen {
 public:
  explicit DevGen(const std::string& architecture_id = kDefaultGeneratorArch);

  std::string architecture_id() const;
  const nn::ParamTable& shape_table() const { return table_; }
  int image_size() const { return size_; }
  void init_parameters(std::uint64_t seed);

  // The developer delta for x, every value in [-1, 1].
  Image forward(const Image& x, nn::Tape* tape = nullptr) const;
  // Accumulates d(loss)/d(theta_g) given d(loss)/d(delta).
  void backward(const nn::Tape& tape, const Image& ddelta, std::span<double> dparams) const;

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  void set_parameters(std::span<const double> values);
  std::uint64_t parameter_hash() const { return nn::hash_parameters(params_); }

 private:
  int size_;
  std::vector<int> channels_;
  nn::ParamTable table_;
  nn::Conv3x3 e1_, e2_, e3_, d3_, d2_, out_;
  std::vector<double> params_;
};

void save_generator(const std::string& path, const DevGen& gen, CheckpointInfo info);
DevGen load_generator(const std::string& path, CheckpointInfo* info = nullptr);

// clamp(x + dose * delta, 0, 1); dose 0 returns x unchanged.
Image apply_developer(const Image& x, const Image& delta, double dose);

// Binary cross-entropy on a clamped confidence.
double developing_loss(double confidence, int label);

// Smoothed total variation: per channel, sum over pixels of
// sqrt(dy^2 + dx^2 + eps) with forward differences, zero past the last row/column.
double tv_loss(const Image& x, double eps);
// Gradient of tv_loss; at eps = 0 a zero-length difference contributes nothing.
Image tv_loss_grad(const Image& x, double eps);

struct Stage1Config {
  std::string architecture = kDefaultGeneratorArch;
  double dose_epsilon = 0.25;
  double lambda_tv = 1e-4;
  double tv_smoothing_eps = 1e-8;
  double learning_rate = 2e-4;
  int epochs = 10;
  int batch_size = 32;
  std::uint64_t seed = 0;
};

std::vector<std::string> validate(const Stage1Config& config, const std::string& prefix);

struct DevelopedLoss {
  double confidence = 0.0;
  double dev = 0.0;  // cross-entropy of the developed image
  double tv = 0.0;   // total variation of the developed image
  double total(double lambda_tv) const { return dev + lambda_tv * tv; }
};

// Loss dev + lambda_tv * tv of one developed sample. Gradients are scaled by
// `scale` and accumulated: w.r.t. delta into *ddelta (when non-null), w.r.t.
// the detector parameters into detector_grad (when nonempty).
DevelopedLoss developed_loss(const Detector& detector, const Image& x, const Image& delta, double dose, int label,
                             double lambda_tv, double tv_eps, double scale, Image* ddelta,
                             std::span<double> detector_grad);

struct Stage1Log {
  std::vector<double> epoch_loss;  // mean dev + lambda_tv * tv
  std::vector<double> epoch_dev;
  std::vector<double> epoch_tv;
};

using Stage1Callback = std::function<void(int epoch, double mean_loss)>;

// Trains theta_g on s1 with the detector frozen. On a non-finite loss the
// generator is restored to the end of the last finished epoch and
// NumericError is thrown. Parameters are rounded to float32 at the end.
Stage1Log train_stage1(DevGen& gen, const Detector& detector, const SampleSet& s1, const Stage1Config& config,
                       const Stage1Callback& on_epoch = {});

}  // namespace devdet
