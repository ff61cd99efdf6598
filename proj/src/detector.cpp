#include "devdet/detector.hpp"

#include <cmath>

#include "devdet/error.hpp"
#include "devdet/loss.hpp"
#include "devdet/nn/adam.hpp"
#include "devdet/nn/arch.hpp"
#include "devdet/rng.hpp"

namespace devdet {

double cross_entropy(double confidence, int label) {
  const double p = std::clamp(confidence, kMinConfidence, 1.0 - kMinConfidence);
  return label == 1 ? -std::log(p) : -std::log(1.0 - p);
}

double sigmoid(double logit) {
  if (logit >= 0.0) return 1.0 / (1.0 + std::exp(-logit));
  const double e = std::exp(logit);
  return e / (1.0 + e);
}

namespace {

using nn::join_dots;

class ConvNetDetector final : public Detector {
 public:
  ConvNetDetector(int size, std::vector<int> channels, int hidden)
      : size_(size), channels_(std::move(channels)), hidden_(hidden) {
    int in = Image::kChannels;
    for (std::size_t i = 0; i < channels_.size(); ++i) {
      convs_.emplace_back(table_, "conv" + std::to_string(i + 1), in, channels_[i], 2);
      in = channels_[i];
    }
    fc_ = nn::Dense(table_, "fc", in, hidden_);
    head_ = nn::Dense(table_, "head", hidden_, 1);
    params_.assign(table_.size(), 0.0);
  }

  std::string architecture_id() const override {
    return "convnet-s" + std::to_string(size_) + "-c" + join_dots(channels_) + "-h" + std::to_string(hidden_);
  }
  const nn::ParamTable& shape_table() const override { return table_; }
  std::size_t feature_dim() const override { return static_cast<std::size_t>(hidden_); }
  int image_size() const override { return size_; }
  std::unique_ptr<Detector> clone() const override { return std::make_unique<ConvNetDetector>(*this); }

  void init_parameters(std::uint64_t seed) override {
    Rng rng(seed);
    for (const auto& c : convs_) c.init(params_, rng);
    fc_.init(params_, rng);
    head_.init(params_, rng, 0.5);
    nn::round_to_float(params_);
  }

  // tape.tensors: [input, block1, ..., blockN]; buffers: [cols1..colsN, pooled, feature]
  double forward(const Image& x, std::vector<double>* feature, nn::Tape* tape) const override {
    check_input(x);
    const std::size_t n = convs_.size();
    nn::Tape local;
    nn::Tape& t = tape ? *tape : local;
    t.tensors.resize(n + 1);
    t.buffers.resize(n + 2);
    t.tensors[0] = nn::from_image(x);
    for (std::size_t i = 0; i < n; ++i) {
      convs_[i].forward(params_, t.tensors[i], t.tensors[i + 1], t.buffers[i]);
      nn::relu_inplace(t.tensors[i + 1].v);
      if (!tape) {
        t.buffers[i].clear();
        t.buffers[i].shrink_to_fit();
      }
    }
    auto& pooled = t.buffers[n];
    pooled.assign(static_cast<std::size_t>(channels_.back()), 0.0);
    nn::global_avg_pool(t.tensors[n], pooled);
    auto& z = t.buffers[n + 1];
    z.assign(static_cast<std::size_t>(hidden_), 0.0);
    fc_.forward(params_, pooled, z);
    nn::relu_inplace(z);
    double logit = 0.0;
    head_.forward(params_, z, std::span<double>(&logit, 1));
    if (feature) *feature = z;
    return logit;
  }

  void backward(const nn::Tape& t, double dlogit, std::span<double> dparams, Image* dinput) const override {
    const std::size_t n = convs_.size();
    const auto& pooled = t.buffers[n];
    const auto& z = t.buffers[n + 1];
    std::vector<double> dz(z.size());
    head_.backward(params_, z, std::span<const double>(&dlogit, 1), dparams, dz);
    nn::relu_backward(z, dz);
    std::vector<double> dpooled(pooled.size());
    fc_.backward(params_, pooled, dz, dparams, dpooled);
    nn::Tensor grad(t.tensors[n].c, t.tensors[n].h, t.tensors[n].w);
    nn::global_avg_pool_backward(dpooled, grad);
    for (std::size_t i = n; i-- > 0;) {
      nn::relu_backward(t.tensors[i + 1].v, grad.v);
      const bool need_input = i > 0 || dinput != nullptr;
      nn::Tensor din;
      convs_[i].backward(params_, t.tensors[i], t.buffers[i], grad, dparams, need_input ? &din : nullptr);
      if (need_input) grad = std::move(din);
    }
    if (dinput) *dinput = nn::to_image(grad);
  }

 private:
  int size_;
  std::vector<int> channels_;
  int hidden_;
  nn::ParamTable table_;
  std::vector<nn::Conv3x3> convs_;
  nn::Dense fc_, head_;
};

class MlpDetector final : public Detector {
 public:
  MlpDetector(int size, int hidden1, int hidden2) : size_(size), h1_(hidden1), h2_(hidden2) {
    fc1_ = nn::Dense(table_, "fc1", Image::kChannels * size * size, h1_);
    fc2_ = nn::Dense(table_, "fc2", h1_, h2_);
    head_ = nn::Dense(table_, "head", h2_, 1);
    params_.assign(table_.size(), 0.0);
  }

  std::string architecture_id() const override {
    return "mlp-s" + std::to_string(size_) + "-h" + std::to_string(h1_) + "." + std::to_string(h2_);
  }
  const nn::ParamTable& shape_table() const override { return table_; }
  std::size_t feature_dim() const override { return static_cast<std::size_t>(h2_); }
  int image_size() const override { return size_; }
  std::unique_ptr<Detector> clone() const override { return std::make_unique<MlpDetector>(*this); }

  void init_parameters(std::uint64_t seed) override {
    Rng rng(seed);
    fc1_.init(params_, rng);
    fc2_.init(params_, rng);
    head_.init(params_, rng, 0.5);
    nn::round_to_float(params_);
  }

  // buffers: [input, hidden1, hidden2]
  double forward(const Image& x, std::vector<double>* feature, nn::Tape* tape) const override {
    check_input(x);
    nn::Tape local;
    nn::Tape& t = tape ? *tape : local;
    t.buffers.resize(3);
    t.buffers[0] = x.pixels;
    t.buffers[1].assign(static_cast<std::size_t>(h1_), 0.0);
    t.buffers[2].assign(static_cast<std::size_t>(h2_), 0.0);
    fc1_.forward(params_, t.buffers[0], t.buffers[1]);
    nn::relu_inplace(t.buffers[1]);
    fc2_.forward(params_, t.buffers[1], t.buffers[2]);
    nn::relu_inplace(t.buffers[2]);
    double logit = 0.0;
    head_.forward(params_, t.buffers[2], std::span<double>(&logit, 1));
    if (feature) *feature = t.buffers[2];
    return logit;
  }

  void backward(const nn::Tape& t, double dlogit, std::span<double> dparams, Image* dinput) const override {
    std::vector<double> d2(static_cast<std::size_t>(h2_)), d1(static_cast<std::size_t>(h1_));
    head_.backward(params_, t.buffers[2], std::span<const double>(&dlogit, 1), dparams, d2);
    nn::relu_backward(t.buffers[2], d2);
    fc2_.backward(params_, t.buffers[1], d2, dparams, d1);
    nn::relu_backward(t.buffers[1], d1);
    std::vector<double> d0;
    if (dinput) d0.assign(t.buffers[0].size(), 0.0);
    fc1_.backward(params_, t.buffers[0], d1, dparams, d0);
    if (dinput) {
      *dinput = Image(size_, size_);
      dinput->pixels = std::move(d0);
    }
  }

 private:
  int size_, h1_, h2_;
  nn::ParamTable table_;
  nn::Dense fc1_, fc2_, head_;
};

}  // namespace

Prediction Detector::predict(const Image& x) const {
  Prediction p;
  p.confidence = sigmoid(forward(x, &p.feature, nullptr));
  return p;
}

void Detector::set_parameters(std::span<const double> values) {
  if (values.size() != params_.size())
    throw ContractError("parameter vector has " + std::to_string(values.size()) + " values, architecture " +
                        architecture_id() + " declares " + std::to_string(params_.size()));
  params_.assign(values.begin(), values.end());
}

void Detector::check_input(const Image& x) const {
  if (x.height != image_size() || x.width != image_size() || x.size() != static_cast<std::size_t>(3 * x.height * x.width))
    throw ContractError("detector " + architecture_id() + " expects " + std::to_string(image_size()) + "x" +
                        std::to_string(image_size()) + " images, got " + std::to_string(x.height) + "x" +
                        std::to_string(x.width));
}

std::unique_ptr<Detector> make_detector(const std::string& id) {
  const nn::ArchSpec spec = nn::parse_arch(id);
  if (spec.family == "convnet")
    return std::make_unique<ConvNetDetector>(spec.field('s', 1)[0], spec.field('c'), spec.field('h', 1)[0]);
  if (spec.family == "mlp") {
    const auto& h = spec.field('h', 2);
    return std::make_unique<MlpDetector>(spec.field('s', 1)[0], h[0], h[1]);
  }
  throw ConfigError("unknown detector architecture '" + id + "'");
}

std::vector<std::string> validate(const TrainConfig& c, const std::string& prefix) {
  std::vector<std::string> v;
  if (!(c.learning_rate > 0.0)) v.push_back(prefix + ".learning_rate must be > 0");
  if (c.epochs < 1) v.push_back(prefix + ".epochs must be >= 1");
  if (c.batch_size < 1) v.push_back(prefix + ".batch_size must be >= 1");
  return v;
}

TrainLog pretrain(Detector& model, const SampleSet& train, const TrainConfig& config, const EpochCallback& on_epoch) {
  if (auto v = validate(config, "train"); !v.empty()) throw ConfigError(std::move(v));
  if (train.empty() || train.count_label(0) == 0 || train.count_label(1) == 0)
    throw ContractError("pretraining needs both real and fake samples");

  nn::Adam adam(model.parameters().size(), config.learning_rate);
  std::vector<double> grad(model.parameters().size());
  TrainLog log;
  nn::Tape tape;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (const auto& batch : epoch_batches(train.size(), static_cast<std::size_t>(config.batch_size), config.seed, epoch)) {
      std::fill(grad.begin(), grad.end(), 0.0);
      const double inv = 1.0 / static_cast<double>(batch.size());
      for (std::size_t idx : batch) {
        const Sample& s = train.samples[idx];
        const Image x = config.augment ? augment(*s.image, config.augmentation, config.seed, epoch, s.sample_id) : *s.image;
        const double p = sigmoid(model.forward(x, nullptr, &tape));
        loss_sum += cross_entropy(p, s.label);
        model.backward(tape, cross_entropy_dlogit(p, s.label) * inv, grad, nullptr);
      }
      adam.step(model.parameters(), grad);
    }
    const double mean = loss_sum / static_cast<double>(train.size());
    if (!std::isfinite(mean) || !nn::all_finite(model.parameters()))
      throw NumericError("non-finite loss in epoch " + std::to_string(epoch + 1) + " (learning rate " +
                         std::to_string(config.learning_rate) + "); try a smaller learning rate");
    log.epoch_loss.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  nn::round_to_float(model.parameters());
  return log;
}

namespace {

double batch_loss(const Detector& model, std::span<const Sample> batch, double scale) {
  double s = 0.0;
  for (const auto& sample : batch) s += cross_entropy(sigmoid(model.forward(*sample.image, nullptr, nullptr)), sample.label);
  return scale * s / static_cast<double>(batch.size());
}

}  // namespace

GradientCheck gradient_check(const Detector& model, std::span<const Sample> batch, double h, double loss_scale) {
  GradientCheck out;
  const std::size_t n = model.parameters().size();
  out.analytic.assign(n, 0.0);
  out.numeric.assign(n, 0.0);
  nn::Tape tape;
  const double inv = loss_scale / static_cast<double>(batch.size());
  for (const auto& s : batch) {
    const double p = sigmoid(model.forward(*s.image, nullptr, &tape));
    model.backward(tape, cross_entropy_dlogit(p, s.label) * inv, out.analytic, nullptr);
  }
  auto probe = model.clone();
  for (std::size_t i = 0; i < n; ++i) {
    const double orig = probe->parameters()[i];
    probe->parameters()[i] = orig + h;
    const double up = batch_loss(*probe, batch, loss_scale);
    probe->parameters()[i] = orig - h;
    const double down = batch_loss(*probe, batch, loss_scale);
    probe->parameters()[i] = orig;
    out.numeric[i] = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(out.analytic[i]), std::abs(out.numeric[i]), 1e-6});
    out.max_rel_error = std::max(out.max_rel_error, std::abs(out.analytic[i] - out.numeric[i]) / denom);
  }
  return out;
}

std::vector<double> confidences(const Detector& model, const SampleSet& set) {
  std::vector<double> out;
  out.reserve(set.size());
  for (const auto& s : set.samples) out.push_back(sigmoid(model.forward(*s.image, nullptr, nullptr)));
  return out;
}

}  // namespace devdet
