#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "devdet/error.hpp"
#include "devdet/ffdev.hpp"
#include "devdet/rng.hpp"

using namespace devdet;

namespace {

Image random_image(int size, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Rng rng(seed);
  Image img(size, size);
  for (double& v : img.pixels) v = rng.uniform(lo, hi);
  return img;
}

void randomize_biases(std::span<double> params, const nn::ParamTable& table, std::uint64_t seed) {
  Rng rng(seed);
  for (const auto& e : table.entries())
    if (e.name.ends_with(".b"))
      for (std::size_t i = 0; i < e.size; ++i) params[e.offset + i] = 0.1 * rng.normal();
}

std::unique_ptr<Detector> toy_detector(std::uint64_t seed) {
  auto d = make_detector("convnet-s8-c3.4-h4");
  d->init_parameters(seed);
  randomize_biases(d->parameters(), d->shape_table(), seed + 1);
  return d;
}

// Independent TV: loops over positions with explicit boundary handling.
double tv_oracle(const Image& x, double eps) {
  double s = 0.0;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < x.height; ++i)
      for (int j = 0; j < x.width; ++j) {
        const double dy = i + 1 < x.height ? x.at(c, i + 1, j) - x.at(c, i, j) : 0.0;
        const double dx = j + 1 < x.width ? x.at(c, i, j + 1) - x.at(c, i, j) : 0.0;
        s += std::sqrt(dy * dy + dx * dx + eps);
      }
  return s;
}

struct ToyStage1 {
  std::unique_ptr<Detector> detector = toy_detector(3);
  DevGen gen{"devgen-s8-c2.3.2"};
  std::vector<Sample> batch;
  double dose = 0.25, lambda_tv = 0.05, eps = 1e-8;

  ToyStage1() {
    gen.init_parameters(4);
    randomize_biases(gen.parameters(), gen.shape_table(), 5);
    // Pixels in [0.3, 0.7] keep x + 0.25 * delta away from the clamp.
    for (int i = 0; i < 4; ++i)
      batch.push_back(Sample{std::make_shared<const Image>(random_image(8, 40 + i, 0.3, 0.7)), i % 2, 0, "t"});
  }

  double loss(const DevGen& g) const {
    double s = 0.0;
    for (const auto& x : batch)
      s += developed_loss(*detector, *x.image, g.forward(*x.image), dose, x.label, lambda_tv, eps, 1.0, nullptr, {})
               .total(lambda_tv);
    return s / static_cast<double>(batch.size());
  }

  std::vector<double> analytic() const {
    std::vector<double> grad(gen.parameters().size(), 0.0);
    nn::Tape tape;
    for (const auto& x : batch) {
      const Image delta = gen.forward(*x.image, &tape);
      Image ddelta(8, 8, 0.0);
      developed_loss(*detector, *x.image, delta, dose, x.label, lambda_tv, eps, 1.0 / batch.size(), &ddelta, {});
      gen.backward(tape, ddelta, grad);
    }
    return grad;
  }
};

double rel_err(double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6}); }

}  // namespace

TEST_CASE("apply_developer examples") {
  const Image x(4, 4, 0.5), ones(4, 4, 1.0);
  CHECK(apply_developer(x, ones, 0.0) == x);
  for (double v : apply_developer(x, ones, 0.25).pixels) CHECK(v == 0.75);
  for (double v : apply_developer(Image(4, 4, 0.9), ones, 0.25).pixels) CHECK(v == 1.0);
  const Image r = random_image(6, 1);
  CHECK(apply_developer(r, random_image(6, 2, -1.0, 1.0), 0.0) == r);
  CHECK_THROWS_AS(apply_developer(x, Image(5, 5), 0.25), ContractError);
  CHECK_THROWS_AS(apply_developer(x, ones, -0.1), ContractError);
}

TEST_CASE("developing_loss examples and formula grid") {
  CHECK(developing_loss(0.5, 0) == doctest::Approx(0.693147).epsilon(1e-6));
  CHECK(developing_loss(0.5, 1) == doctest::Approx(0.693147).epsilon(1e-6));
  CHECK(developing_loss(0.9, 1) == doctest::Approx(0.105361).epsilon(1e-5));
  for (int i = 1; i < 100; ++i) {
    const double p = i / 100.0;
    for (int y : {0, 1}) {
      const double expected = -(y * std::log(p) + (1 - y) * std::log(1.0 - p));
      CHECK(std::abs(developing_loss(p, y) - expected) <= 1e-12);
    }
  }
  CHECK(developing_loss(0.0, 1) == doctest::Approx(-std::log(1e-7)));
  CHECK(std::isfinite(developing_loss(1.0, 0)));
}

TEST_CASE("tv_loss: 2x2 example, constant image, homogeneity, oracle") {
  Image x(2, 2);
  for (int c = 0; c < 3; ++c) {
    x.at(c, 0, 0) = 0.0, x.at(c, 0, 1) = 1.0;
    x.at(c, 1, 0) = 0.0, x.at(c, 1, 1) = 1.0;
  }
  // Per channel: (0,0) -> sqrt(0 + 1) = 1, (0,1) -> 0, (1,0) -> 1, (1,1) -> 0.
  CHECK(tv_loss(x, 0.0) == 6.0);
  CHECK(tv_loss(Image(8, 8, 0.3), 1e-8) == doctest::Approx(192 * 1e-4).epsilon(1e-12));
  CHECK(tv_loss(Image(8, 8, 0.3), 0.0) == 0.0);
  const Image r = random_image(9, 3);
  Image scaled = r;
  for (double& v : scaled.pixels) v *= -2.5;
  CHECK(tv_loss(scaled, 0.0) == doctest::Approx(2.5 * tv_loss(r, 0.0)).epsilon(1e-12));
  for (int s = 0; s < 5; ++s) {
    const Image y = random_image(7 + s, 10 + s);
    CHECK(tv_loss(y, 1e-8) == doctest::Approx(tv_oracle(y, 1e-8)).epsilon(1e-12));
  }
}

TEST_CASE("tv_loss_grad matches central differences") {
  const Image x = random_image(6, 7);
  const Image g = tv_loss_grad(x, 1e-8);
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    Image up = x, down = x;
    up.pixels[i] += 1e-6;
    down.pixels[i] -= 1e-6;
    worst = std::max(worst, rel_err(g.pixels[i], (tv_loss(up, 1e-8) - tv_loss(down, 1e-8)) / 2e-6));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("developer output lies in [-1, 1] and has the input shape") {
  DevGen gen;
  gen.init_parameters(1);
  randomize_biases(gen.parameters(), gen.shape_table(), 2);
  for (int i = 0; i < 3; ++i) {
    const Image d = gen.forward(random_image(64, i));
    CHECK(d.height == 64);
    CHECK(d.width == 64);
    for (double v : d.pixels) CHECK((v >= -1.0 && v <= 1.0));
    const Image x = random_image(64, 100 + i);
    const Image dev = apply_developer(x, d, 0.25);
    for (std::size_t k = 0; k < x.size(); ++k) CHECK(std::abs(dev.pixels[k] - x.pixels[k]) <= 0.25 + 1e-15);
  }
}

TEST_CASE("stage-1 loss gradient w.r.t. the generator matches central differences") {
  ToyStage1 t;
  const auto a = t.analytic();
  DevGen probe = t.gen;
  double worst = 0.0, tv_path = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double orig = probe.parameters()[i];
    probe.parameters()[i] = orig + 1e-5;
    const double up = t.loss(probe);
    probe.parameters()[i] = orig - 1e-5;
    const double down = t.loss(probe);
    probe.parameters()[i] = orig;
    worst = std::max(worst, rel_err(a[i], (up - down) / 2e-5));
  }
  CHECK(worst < 1e-4);
  // The TV term alone contributes gradient: compare against lambda_tv = 0.
  ToyStage1 no_tv;
  no_tv.lambda_tv = 0.0;
  const auto b = no_tv.analytic();
  for (std::size_t i = 0; i < a.size(); ++i) tv_path = std::max(tv_path, std::abs(a[i] - b[i]));
  CHECK(tv_path > 1e-6);
}

TEST_CASE("developed loss gradient w.r.t. the detector matches central differences") {
  ToyStage1 t;
  const Image x = *t.batch[1].image;
  const Image delta = t.gen.forward(x);
  std::vector<double> grad(t.detector->parameters().size(), 0.0);
  developed_loss(*t.detector, x, delta, 0.25, 1, 0.0, 1e-8, 1.0, nullptr, grad);
  auto probe = t.detector->clone();
  double worst = 0.0;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double orig = probe->parameters()[i];
    probe->parameters()[i] = orig + 1e-5;
    const double up = developed_loss(*probe, x, delta, 0.25, 1, 0.0, 1e-8, 1.0, nullptr, {}).dev;
    probe->parameters()[i] = orig - 1e-5;
    const double down = developed_loss(*probe, x, delta, 0.25, 1, 0.0, 1e-8, 1.0, nullptr, {}).dev;
    probe->parameters()[i] = orig;
    worst = std::max(worst, rel_err(grad[i], (up - down) / 2e-5));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("training lowers the loss and leaves the detector untouched") {
  ToyStage1 t;
  SampleSet s1{"s1", t.batch};
  const auto before = t.detector->parameter_hash();
  Stage1Config cfg;
  cfg.architecture = "devgen-s8-c2.3.2";
  cfg.learning_rate = 1e-2;
  cfg.epochs = 15;
  cfg.batch_size = 2;
  cfg.lambda_tv = 0.01;
  const Stage1Log log = train_stage1(t.gen, *t.detector, s1, cfg);
  CHECK(log.epoch_loss.size() == 15);
  CHECK(log.epoch_loss.back() < log.epoch_loss.front());
  CHECK(t.detector->parameter_hash() == before);
  CHECK(nn::float_representable(t.gen.parameters()));
}

TEST_CASE("dominant smoothness term drives the developer to a constant") {
  // Constant inputs: the developed image is constant iff the developer is.
  SampleSet s1{"flat", {}};
  for (int i = 0; i < 4; ++i)
    s1.samples.push_back(Sample{std::make_shared<const Image>(8, 8, 0.3 + 0.1 * i), i % 2, 0, "f" + std::to_string(i)});
  auto det = toy_detector(9);
  DevGen gen("devgen-s8-c2.3.2");
  gen.init_parameters(10);
  Stage1Config cfg;
  cfg.architecture = "devgen-s8-c2.3.2";
  cfg.lambda_tv = 1e6;
  cfg.learning_rate = 1e-2;
  cfg.epochs = 1000;
  cfg.batch_size = 4;
  train_stage1(gen, *det, s1, cfg);
  const double flat = tv_loss(Image(8, 8, 0.5), cfg.tv_smoothing_eps);
  for (const auto& s : s1.samples) {
    const Image developed = apply_developer(*s.image, gen.forward(*s.image), cfg.dose_epsilon);
    CHECK(std::abs(tv_loss(developed, cfg.tv_smoothing_eps) - flat) <= 1e-3);
  }
}

TEST_CASE("a non-finite loss restores the generator and reports a numeric error") {
  ToyStage1 t;
  SampleSet s1{"s1", t.batch};
  t.detector->parameters()[0] = std::numeric_limits<double>::quiet_NaN();
  const std::vector<double> before(t.gen.parameters().begin(), t.gen.parameters().end());
  Stage1Config cfg;
  cfg.architecture = "devgen-s8-c2.3.2";
  cfg.epochs = 2;
  cfg.batch_size = 2;
  CHECK_THROWS_AS(train_stage1(t.gen, *t.detector, s1, cfg), NumericError);
  CHECK(std::equal(before.begin(), before.end(), t.gen.parameters().begin()));
}

TEST_CASE("stage-1 config validation lists every violation") {
  Stage1Config c;
  c.dose_epsilon = 1.5;
  c.lambda_tv = -1.0;
  c.learning_rate = 0.0;
  c.epochs = 0;
  c.architecture = "devgen-bogus";
  CHECK(validate(c, "stage1").size() == 5);
  CHECK(validate(Stage1Config{}, "stage1").empty());
}

TEST_CASE("generator checkpoint round-trip") {
  DevGen gen;
  gen.init_parameters(12);
  const auto path = std::filesystem::temp_directory_path() / "devdet_test_ffdev_gen.ckpt";
  save_generator(path.string(), gen, {});
  CheckpointInfo info;
  const DevGen back = load_generator(path.string(), &info);
  CHECK(info.kind == "generator");
  CHECK(back.architecture_id() == gen.architecture_id());
  const Image x = random_image(64, 3);
  CHECK(back.forward(x) == gen.forward(x));
  std::filesystem::remove(path);
}
