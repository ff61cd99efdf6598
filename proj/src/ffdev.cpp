#include "devdet/ffdev.hpp"

#include <algorithm>
#include <cmath>

#include "devdet/error.hpp"
#include "devdet/loss.hpp"
#include "devdet/nn/adam.hpp"
#include "devdet/nn/arch.hpp"
#include "devdet/rng.hpp"

namespace devdet {

namespace {

enum Slot { kX, kE1, kE2, kE3, kC3, kD3, kC2, kD2, kC1, kDelta, kSlots };
enum Cols { kColE1, kColE2, kColE3, kColD3, kColD2, kColOut, kCols };

}  // namespace

DevGen::DevGen(const std::string& id) {
  const nn::ArchSpec spec = nn::parse_arch(id);
  if (spec.family != "devgen") throw ConfigError("unknown generator architecture '" + id + "'");
  size_ = spec.field('s', 1)[0];
  channels_ = spec.field('c', 3);
  const int c0 = channels_[0], c1 = channels_[1], c2 = channels_[2];
  e1_ = nn::Conv3x3(table_, "enc1", Image::kChannels, c0, 2);
  e2_ = nn::Conv3x3(table_, "enc2", c0, c1, 2);
  e3_ = nn::Conv3x3(table_, "enc3", c1, c2, 2);
  d3_ = nn::Conv3x3(table_, "dec3", c2 + c1, c1, 1);
  d2_ = nn::Conv3x3(table_, "dec2", c1 + c0, c0, 1);
  out_ = nn::Conv3x3(table_, "out", c0 + Image::kChannels, Image::kChannels, 1);
  params_.assign(table_.size(), 0.0);
}

std::string DevGen::architecture_id() const {
  return "devgen-s" + std::to_string(size_) + "-c" + nn::join_dots(channels_);
}

void DevGen::init_parameters(std::uint64_t seed) {
  Rng rng(seed);
  for (const auto* c : {&e1_, &e2_, &e3_, &d3_, &d2_}) c->init(params_, rng);
  out_.init(params_, rng, 0.5);
  nn::round_to_float(params_);
}

void DevGen::set_parameters(std::span<const double> values) {
  if (values.size() != params_.size())
    throw ContractError("parameter vector has " + std::to_string(values.size()) + " values, architecture " +
                        architecture_id() + " declares " + std::to_string(params_.size()));
  params_.assign(values.begin(), values.end());
}

Image DevGen::forward(const Image& x, nn::Tape* tape) const {
  if (x.height != size_ || x.width != size_)
    throw ContractError("generator " + architecture_id() + " expects " + std::to_string(size_) + "x" +
                        std::to_string(size_) + " images, got " + std::to_string(x.height) + "x" + std::to_string(x.width));
  nn::Tape local;
  nn::Tape& t = tape ? *tape : local;
  t.tensors.resize(kSlots);
  t.buffers.resize(kCols);
  auto& T = t.tensors;
  auto& B = t.buffers;
  T[kX] = nn::from_image(x);
  e1_.forward(params_, T[kX], T[kE1], B[kColE1]);
  nn::relu_inplace(T[kE1].v);
  e2_.forward(params_, T[kE1], T[kE2], B[kColE2]);
  nn::relu_inplace(T[kE2].v);
  e3_.forward(params_, T[kE2], T[kE3], B[kColE3]);
  nn::relu_inplace(T[kE3].v);
  T[kC3] = nn::concat_channels(nn::upsample2x(T[kE3], T[kE2].h, T[kE2].w), T[kE2]);
  d3_.forward(params_, T[kC3], T[kD3], B[kColD3]);
  nn::relu_inplace(T[kD3].v);
  T[kC2] = nn::concat_channels(nn::upsample2x(T[kD3], T[kE1].h, T[kE1].w), T[kE1]);
  d2_.forward(params_, T[kC2], T[kD2], B[kColD2]);
  nn::relu_inplace(T[kD2].v);
  T[kC1] = nn::concat_channels(nn::upsample2x(T[kD2], T[kX].h, T[kX].w), T[kX]);
  out_.forward(params_, T[kC1], T[kDelta], B[kColOut]);
  for (double& v : T[kDelta].v) v = std::tanh(v);
  return nn::to_image(T[kDelta]);
}

void DevGen::backward(const nn::Tape& t, const Image& ddelta, std::span<double> dparams) const {
  const auto& T = t.tensors;
  const auto& B = t.buffers;
  if (ddelta.pixels.size() != T[kDelta].v.size()) throw ContractError("developer gradient shape mismatch");
  nn::Tensor dpre(Image::kChannels, T[kDelta].h, T[kDelta].w);
  for (std::size_t i = 0; i < dpre.v.size(); ++i) dpre.v[i] = ddelta.pixels[i] * (1.0 - T[kDelta].v[i] * T[kDelta].v[i]);

  nn::Tensor dc1, dup, dskip, dc2, dc3, dd, de2, de1, din;
  out_.backward(params_, T[kC1], B[kColOut], dpre, dparams, &dc1);
  nn::Tensor dx;
  nn::split_channels(dc1, T[kD2].c, dup, dx);
  dd = nn::upsample2x_backward(dup, T[kD2].h, T[kD2].w);
  nn::relu_backward(T[kD2].v, dd.v);

  d2_.backward(params_, T[kC2], B[kColD2], dd, dparams, &dc2);
  nn::split_channels(dc2, T[kD3].c, dup, de1);
  dd = nn::upsample2x_backward(dup, T[kD3].h, T[kD3].w);
  nn::relu_backward(T[kD3].v, dd.v);

  d3_.backward(params_, T[kC3], B[kColD3], dd, dparams, &dc3);
  nn::split_channels(dc3, T[kE3].c, dup, de2);
  nn::Tensor de3 = nn::upsample2x_backward(dup, T[kE3].h, T[kE3].w);
  nn::relu_backward(T[kE3].v, de3.v);

  e3_.backward(params_, T[kE2], B[kColE3], de3, dparams, &din);
  for (std::size_t i = 0; i < de2.v.size(); ++i) de2.v[i] += din.v[i];
  nn::relu_backward(T[kE2].v, de2.v);

  e2_.backward(params_, T[kE1], B[kColE2], de2, dparams, &din);
  for (std::size_t i = 0; i < de1.v.size(); ++i) de1.v[i] += din.v[i];
  nn::relu_backward(T[kE1].v, de1.v);

  e1_.backward(params_, T[kX], B[kColE1], de1, dparams, nullptr);
}

void save_generator(const std::string& path, const DevGen& gen, CheckpointInfo info) {
  info.kind = "generator";
  info.architecture_id = gen.architecture_id();
  info.shapes = gen.shape_table().entries();
  write_checkpoint(path, info, gen.parameters());
}

DevGen load_generator(const std::string& path, CheckpointInfo* info) {
  Checkpoint ck = read_checkpoint(path);
  if (ck.info.kind != "generator") throw LoadError(path + ": expected a generator checkpoint, found '" + ck.info.kind + "'");
  DevGen gen(ck.info.architecture_id);
  if (gen.shape_table().entries() != ck.info.shapes)
    throw LoadError(path + ": shape table does not match architecture " + ck.info.architecture_id);
  gen.set_parameters(ck.parameters);
  if (info) *info = std::move(ck.info);
  return gen;
}

Image apply_developer(const Image& x, const Image& delta, double dose) {
  if (!x.same_shape(delta)) throw ContractError("developer shape does not match image");
  if (!(dose >= 0.0)) throw ContractError("dose must be >= 0");
  if (dose == 0.0) return x;
  Image out = x;
  for (std::size_t i = 0; i < out.pixels.size(); ++i) out.pixels[i] = std::clamp(x.pixels[i] + dose * delta.pixels[i], 0.0, 1.0);
  return out;
}

double developing_loss(double confidence, int label) { return cross_entropy(confidence, label); }

namespace {

// Calls f(channel plane offset, y, x, dy, dx, s) for every summed position.
template <typename F>
void for_each_tv_term(const Image& img, double eps, F&& f) {
  const int h = img.height, w = img.width;
  const std::size_t plane = img.plane();
  for (int c = 0; c < Image::kChannels; ++c) {
    const double* p = img.pixels.data() + c * plane;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        const double dy = y + 1 < h ? p[i + w] - p[i] : 0.0;
        const double dx = x + 1 < w ? p[i + 1] - p[i] : 0.0;
        f(c * plane, i, dy, dx, std::sqrt(dy * dy + dx * dx + eps));
      }
  }
}

}  // namespace

double tv_loss(const Image& img, double eps) {
  if (img.height < 2 || img.width < 2) throw ContractError("total variation needs an image of at least 2x2");
  double total = 0.0;
  for_each_tv_term(img, eps, [&](std::size_t, std::size_t, double, double, double s) { total += s; });
  return total;
}

Image tv_loss_grad(const Image& img, double eps) {
  if (img.height < 2 || img.width < 2) throw ContractError("total variation needs an image of at least 2x2");
  Image g(img.height, img.width, 0.0);
  const int h = img.height, w = img.width;
  for_each_tv_term(img, eps, [&](std::size_t base, std::size_t i, double dy, double dx, double s) {
    if (s == 0.0) return;
    double* gp = g.pixels.data() + base;
    const std::size_t y = i / static_cast<std::size_t>(w), x = i % static_cast<std::size_t>(w);
    if (static_cast<int>(y) + 1 < h) {
      gp[i + w] += dy / s;
      gp[i] -= dy / s;
    }
    if (static_cast<int>(x) + 1 < w) {
      gp[i + 1] += dx / s;
      gp[i] -= dx / s;
    }
  });
  return g;
}

std::vector<std::string> validate(const Stage1Config& c, const std::string& prefix) {
  std::vector<std::string> v;
  if (!(c.dose_epsilon > 0.0 && c.dose_epsilon <= 1.0)) v.push_back(prefix + ".dose_epsilon must lie in (0, 1]");
  if (!(c.lambda_tv >= 0.0)) v.push_back(prefix + ".lambda_tv must be >= 0");
  if (!(c.tv_smoothing_eps >= 0.0)) v.push_back(prefix + ".tv_smoothing_eps must be >= 0");
  if (!(c.learning_rate > 0.0)) v.push_back(prefix + ".learning_rate must be > 0");
  if (c.epochs < 1) v.push_back(prefix + ".epochs must be >= 1");
  if (c.batch_size < 1) v.push_back(prefix + ".batch_size must be >= 1");
  try {
    DevGen probe(c.architecture);
  } catch (const ConfigError& e) {
    for (const auto& m : e.violations()) v.push_back(prefix + ".architecture: " + m);
  }
  return v;
}

DevelopedLoss developed_loss(const Detector& detector, const Image& x, const Image& delta, double dose, int label,
                             double lambda_tv, double tv_eps, double scale, Image* ddelta,
                             std::span<double> detector_grad) {
  const Image xt = apply_developer(x, delta, dose);
  const bool need_input = ddelta != nullptr;
  nn::Tape tape;
  DevelopedLoss out;
  out.confidence = sigmoid(detector.forward(xt, nullptr, need_input || !detector_grad.empty() ? &tape : nullptr));
  out.dev = developing_loss(out.confidence, label);
  out.tv = lambda_tv != 0.0 ? tv_loss(xt, tv_eps) : 0.0;
  if (!need_input && detector_grad.empty()) return out;

  Image dxt;
  detector.backward(tape, cross_entropy_dlogit(out.confidence, label) * scale, detector_grad, need_input ? &dxt : nullptr);
  if (!need_input) return out;
  if (lambda_tv != 0.0) {
    const Image gtv = tv_loss_grad(xt, tv_eps);
    for (std::size_t i = 0; i < dxt.pixels.size(); ++i) dxt.pixels[i] += scale * lambda_tv * gtv.pixels[i];
  }
  // x~ = clamp(x + dose * delta): the derivative is dose inside (0, 1), zero where clamped.
  for (std::size_t i = 0; i < dxt.pixels.size(); ++i) {
    const double raw = x.pixels[i] + dose * delta.pixels[i];
    if (raw > 0.0 && raw < 1.0) ddelta->pixels[i] += dose * dxt.pixels[i];
  }
  return out;
}

Stage1Log train_stage1(DevGen& gen, const Detector& detector, const SampleSet& s1, const Stage1Config& config,
                       const Stage1Callback& on_epoch) {
  if (auto v = validate(config, "stage1"); !v.empty()) throw ConfigError(std::move(v));
  if (s1.empty()) throw ContractError("stage-1 set is empty");
  const std::uint64_t detector_hash = detector.parameter_hash();

  nn::Adam adam(gen.parameters().size(), config.learning_rate);
  std::vector<double> grad(gen.parameters().size());
  std::vector<double> last_good(gen.parameters().begin(), gen.parameters().end());
  Stage1Log log;
  nn::Tape tape;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_sum = 0.0, dev_sum = 0.0, tv_sum = 0.0;
    for (const auto& batch : epoch_batches(s1.size(), static_cast<std::size_t>(config.batch_size), config.seed, epoch)) {
      std::fill(grad.begin(), grad.end(), 0.0);
      const double inv = 1.0 / static_cast<double>(batch.size());
      for (std::size_t idx : batch) {
        const Sample& s = s1.samples[idx];
        const Image delta = gen.forward(*s.image, &tape);
        Image ddelta(delta.height, delta.width, 0.0);
        const DevelopedLoss l = developed_loss(detector, *s.image, delta, config.dose_epsilon, s.label, config.lambda_tv,
                                               config.tv_smoothing_eps, inv, &ddelta, {});
        loss_sum += l.total(config.lambda_tv);
        dev_sum += l.dev;
        tv_sum += l.tv;
        gen.backward(tape, ddelta, grad);
      }
      adam.step(gen.parameters(), grad);
    }
    const double n = static_cast<double>(s1.size());
    if (!std::isfinite(loss_sum) || !nn::all_finite(gen.parameters())) {
      gen.set_parameters(last_good);
      throw NumericError("non-finite stage-1 loss in epoch " + std::to_string(epoch + 1) + " (learning rate " +
                         std::to_string(config.learning_rate) + "); generator restored to the last finished epoch");
    }
    last_good.assign(gen.parameters().begin(), gen.parameters().end());
    log.epoch_loss.push_back(loss_sum / n);
    log.epoch_dev.push_back(dev_sum / n);
    log.epoch_tv.push_back(tv_sum / n);
    if (on_epoch) on_epoch(epoch, loss_sum / n);
  }
  nn::round_to_float(gen.parameters());
  if (detector.parameter_hash() != detector_hash) throw ContractError("detector parameters changed during stage 1");
  return log;
}

}  // namespace devdet
