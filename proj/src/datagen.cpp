#include "devdet/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "devdet/error.hpp"
#include "devdet/simd/kernels.hpp"

namespace devdet::datagen {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSensorNoise = 0.01;

double smoothstep(double e0, double e1, double v) {
  const double t = std::clamp((v - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

std::vector<double> texture(TextureKind kind, int size, Rng& rng) {
  std::vector<double> t(static_cast<std::size_t>(size) * size, 0.0);
  auto at = [&](int y, int x) -> double& { return t[static_cast<std::size_t>(y) * size + x]; };
  switch (kind) {
    case TextureKind::stripes: {
      const double period = rng.uniform(6.0, 14.0);
      const double angle = rng.uniform(0.0, kPi);
      const double phase = rng.uniform(0.0, 2.0 * kPi);
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
          at(y, x) = std::sin(2.0 * kPi * (x * std::cos(angle) + y * std::sin(angle)) / period + phase);
      break;
    }
    case TextureKind::checker: {
      const double period = rng.uniform(5.0, 10.0);
      const double ox = rng.uniform(0.0, period), oy = rng.uniform(0.0, period);
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
          at(y, x) = std::tanh(3.0 * std::sin(kPi * (x + ox) / period)) * std::tanh(3.0 * std::sin(kPi * (y + oy) / period));
      break;
    }
    case TextureKind::blobs: {
      for (int k = 0; k < 6; ++k) {
        const double cx = rng.uniform(0.0, size), cy = rng.uniform(0.0, size);
        const double sigma = rng.uniform(size / 10.0, size / 5.0);
        const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
        for (int y = 0; y < size; ++y)
          for (int x = 0; x < size; ++x) {
            const double r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
            at(y, x) += sign * std::exp(-r2 / (2.0 * sigma * sigma));
          }
      }
      for (double& v : t) v = std::clamp(v, -1.0, 1.0);
      break;
    }
    case TextureKind::gradient: {
      const double angle = rng.uniform(0.0, 2.0 * kPi);
      const double c = size / 2.0;
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
          at(y, x) = std::clamp(((x - c) * std::cos(angle) + (y - c) * std::sin(angle)) / c, -1.0, 1.0);
      break;
    }
    case TextureKind::speckle: {
      for (double& g : t) g = rng.uniform(-1.0, 1.0);
      break;
    }
  }
  return t;
}

struct Rect {
  int x0, y0, w, h;
};

Rect random_patch(int height, int width, Rng& rng) {
  const double frac = rng.uniform(0.07, 0.14);
  const double aspect = rng.uniform(0.7, 1.4);
  const double area = frac * height * width;
  const int w = std::clamp(static_cast<int>(std::lround(std::sqrt(area / aspect))), 1, width);
  const int h = std::clamp(static_cast<int>(std::lround(area / w)), 1, height);
  const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(width - w + 1)));
  const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(height - h + 1)));
  return {x0, y0, w, h};
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Split assign_split(const BenchmarkConfig& c, bool holdout, int i) {
  if (holdout) return Split::test;
  const int n = c.images_per_domain_per_class;
  const int n_train = static_cast<int>(std::lround(n * c.train_fraction));
  const int n_val = static_cast<int>(std::lround(n * c.val_fraction));
  if (i < n_train) return Split::train;
  if (i < n_train + n_val) return Split::val;
  return Split::test;
}

}  // namespace

std::vector<std::string> validate(const BenchmarkConfig& c) {
  std::vector<std::string> v;
  if (c.domains.empty()) v.push_back("benchmark.domains must not be empty");
  if (c.image_size < 32) v.push_back("benchmark.image_size must be >= 32");
  if (c.images_per_domain_per_class < 100) v.push_back("benchmark.images_per_domain_per_class must be >= 100");
  if (c.train_fraction <= 0.0 || c.val_fraction < 0.0 || c.train_fraction + c.val_fraction >= 1.0)
    v.push_back("benchmark split fractions must leave a nonempty test split");
  if (c.stats_samples_per_class < 2) v.push_back("benchmark.stats_samples_per_class must be >= 2");
  for (std::size_t i = 0; i < c.domains.size(); ++i) {
    const auto& d = c.domains[i];
    const std::string tag = "domain " + std::to_string(d.domain_id);
    for (double m : d.color_mean)
      if (!(m >= 0.0 && m <= 1.0)) v.push_back(tag + ": color_mean components must lie in [0,1]");
    if (!(d.trace_amplitude > 0.0 && d.trace_amplitude <= 0.2)) v.push_back(tag + ": trace_amplitude must lie in (0, 0.2]");
    if (d.color_jitter < 0.0) v.push_back(tag + ": color_jitter must be >= 0");
    if (d.texture_amplitude < 0.0) v.push_back(tag + ": texture_amplitude must be >= 0");
    for (std::size_t j = 0; j < i; ++j) {
      const auto& o = c.domains[j];
      if (o.domain_id == d.domain_id) v.push_back(tag + ": duplicate domain_id");
      double dist2 = 0.0;
      for (int k = 0; k < 3; ++k) dist2 += (d.color_mean[k] - o.color_mean[k]) * (d.color_mean[k] - o.color_mean[k]);
      if (o.texture == d.texture && std::sqrt(dist2) < 0.3)
        v.push_back(tag + " and domain " + std::to_string(o.domain_id) +
                    " share a texture and have colour means closer than 0.3");
    }
  }
  for (int h : c.holdout_domain_ids) {
    const bool known = std::any_of(c.domains.begin(), c.domains.end(), [&](const DomainSpec& d) { return d.domain_id == h; });
    if (!known) v.push_back("holdout domain " + std::to_string(h) + " is not a configured domain");
  }
  return v;
}

double TraceField::coverage() const {
  if (mask.empty()) return 0.0;
  const auto covered = std::count_if(mask.begin(), mask.end(), [](double m) { return m > 0.0; });
  return static_cast<double>(covered) / static_cast<double>(mask.size());
}

TraceField make_trace(const DomainSpec& spec, int height, int width, Rng& rng) {
  TraceField t;
  t.amplitude = spec.trace_amplitude;
  t.mask.assign(static_cast<std::size_t>(height) * width, 0.0);
  t.carrier = Image(height, width, 0.0);
  auto mask = [&](int y, int x) -> double& { return t.mask[static_cast<std::size_t>(y) * width + x]; };

  switch (spec.trace) {
    case TraceKind::ellipse: {
      const double frac = rng.uniform(0.07, 0.14);
      const double aspect = rng.uniform(0.7, 1.4);
      const double a = std::sqrt(frac * height * width / (kPi * aspect));
      const double b = aspect * a;
      const double r = std::max(a, b);
      const double cx = rng.uniform(r, width - r), cy = rng.uniform(r, height - r);
      const double theta = rng.uniform(0.0, kPi);
      const std::array<double, 3> tint{1.0, 0.6, 0.3};
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
          const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
          const double u = (dx * std::cos(theta) + dy * std::sin(theta)) / a;
          const double v = (-dx * std::sin(theta) + dy * std::cos(theta)) / b;
          const double rho = std::sqrt(u * u + v * v);
          if (rho < 1.0) {
            mask(y, x) = 1.0 - smoothstep(0.85, 1.0, rho);
            const double grid = ((x + y) % 2 == 0) ? 1.0 : -1.0;
            for (int c = 0; c < 3; ++c) t.carrier.at(c, y, x) = tint[c] * grid;
          }
        }
      break;
    }
    case TraceKind::ripple: {
      const Rect p = random_patch(height, width, rng);
      const double period = rng.uniform(3.0, 4.5);
      const double angle = rng.uniform(0.0, kPi);
      const double phase = rng.uniform(0.0, 2.0 * kPi);
      for (int y = p.y0; y < p.y0 + p.h; ++y)
        for (int x = p.x0; x < p.x0 + p.w; ++x) {
          mask(y, x) = 1.0;
          const double s = std::sin(2.0 * kPi * (x * std::cos(angle) + y * std::sin(angle)) / period + phase);
          for (int c = 0; c < 3; ++c) t.carrier.at(c, y, x) = s;
        }
      break;
    }
    case TraceKind::channel_offset: {
      const Rect p = random_patch(height, width, rng);
      const std::array<double, 3> shift{1.0, 0.0, -1.0};
      for (int y = p.y0; y < p.y0 + p.h; ++y)
        for (int x = p.x0; x < p.x0 + p.w; ++x) {
          mask(y, x) = 1.0;
          for (int c = 0; c < 3; ++c) t.carrier.at(c, y, x) = shift[c];
        }
      break;
    }
  }
  return t;
}

Image apply_trace(const Image& image, const TraceField& trace) {
  if (!image.same_shape(trace.carrier)) throw ContractError("trace shape does not match image");
  Image out = image;
  const std::size_t plane = image.plane();
  for (int c = 0; c < Image::kChannels; ++c)
    for (std::size_t p = 0; p < plane; ++p) {
      const double m = trace.mask[p];
      if (m == 0.0) continue;
      double& v = out.pixels[c * plane + p];
      v = std::clamp(v + trace.amplitude * m * trace.carrier.pixels[c * plane + p], 0.0, 1.0);
    }
  return out;
}

Image inject_trace(const Image& image, const DomainSpec& spec, Rng& rng) {
  return apply_trace(image, make_trace(spec, image.height, image.width, rng));
}

Image render_clean(const DomainSpec& spec, int size, Rng& rng) {
  std::array<double, 3> color{};
  for (int c = 0; c < 3; ++c) color[c] = spec.color_mean[c] + spec.color_jitter * rng.normal();
  const std::vector<double> tex = texture(spec.texture, size, rng);
  Image img(size, size);
  for (int c = 0; c < 3; ++c) {
    auto plane = img.channel(c);
    for (std::size_t p = 0; p < plane.size(); ++p)
      plane[p] = std::clamp(color[c] + spec.texture_amplitude * tex[p] + kSensorNoise * rng.normal(), 0.0, 1.0);
  }
  return img;
}

std::size_t sample_count(const BenchmarkConfig& config) {
  return config.domains.size() * 2 * static_cast<std::size_t>(config.images_per_domain_per_class);
}

RenderedSample render_sample(const BenchmarkConfig& config, std::size_t index) {
  const std::size_t n = static_cast<std::size_t>(config.images_per_domain_per_class);
  const std::size_t group = index / n;
  const int i = static_cast<int>(index % n);
  const DomainSpec& spec = config.domains.at(group / 2);
  const int label = static_cast<int>(group % 2);

  Rng rng(substream(config.seed, static_cast<std::uint64_t>(index)));
  RenderedSample s;
  s.label = label;
  s.domain_id = spec.domain_id;
  const bool holdout = std::find(config.holdout_domain_ids.begin(), config.holdout_domain_ids.end(), spec.domain_id) !=
                       config.holdout_domain_ids.end();
  s.split = assign_split(config, holdout, i);
  char id[32];
  std::snprintf(id, sizeof id, "s%06zu", index);
  s.sample_id = id;

  const Image clean = render_clean(spec, config.image_size, rng);
  s.clean = quantized(clean);
  s.image = label == 1 ? quantized(inject_trace(clean, spec, rng)) : s.clean;
  return s;
}

DominanceStats measure_dominance(const BenchmarkConfig& config) {
  const std::size_t n = static_cast<std::size_t>(config.images_per_domain_per_class);
  const std::size_t cap = std::min(n, static_cast<std::size_t>(config.stats_samples_per_class));
  struct Item {
    Image image;
    int domain;
    int label;
  };
  std::vector<Item> items;
  double trace_sum = 0.0;
  std::size_t trace_count = 0;
  for (std::size_t group = 0; group < config.domains.size() * 2; ++group)
    for (std::size_t i = 0; i < cap; ++i) {
      RenderedSample s = render_sample(config, group * n + i);
      if (s.label == 1) {
        trace_sum += std::sqrt(simd::sq_dist(s.image.pixels.data(), s.clean.pixels.data(), s.image.size()));
        ++trace_count;
      }
      items.push_back({std::move(s.image), s.domain_id, s.label});
    }

  double inter_sum = 0.0, rf_sum = 0.0;
  std::size_t inter_count = 0, rf_count = 0;
  for (std::size_t a = 0; a < items.size(); ++a)
    for (std::size_t b = a + 1; b < items.size(); ++b) {
      const bool cross = items[a].domain != items[b].domain;
      const bool real_fake = !cross && items[a].label != items[b].label;
      if (!cross && !real_fake) continue;
      const double d = std::sqrt(simd::sq_dist(items[a].image.pixels.data(), items[b].image.pixels.data(), items[a].image.size()));
      if (cross) {
        inter_sum += d;
        ++inter_count;
      } else {
        rf_sum += d;
        ++rf_count;
      }
    }

  DominanceStats st;
  st.inter_domain_distance = inter_count ? inter_sum / static_cast<double>(inter_count) : 0.0;
  st.real_fake_distance = rf_count ? rf_sum / static_cast<double>(rf_count) : 0.0;
  st.trace_energy = trace_count ? trace_sum / static_cast<double>(trace_count) : 0.0;
  st.trace_ratio = st.inter_domain_distance > 0.0 ? st.trace_energy / st.inter_domain_distance : 0.0;
  st.dominance_factor = st.real_fake_distance > 0.0 ? st.inter_domain_distance / st.real_fake_distance : 0.0;
  return st;
}

Manifest generate_benchmark(const BenchmarkConfig& config, const std::filesystem::path& out_dir,
                            const std::string& config_hash) {
  if (auto violations = validate(config); !violations.empty()) throw ConfigError(std::move(violations));
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "images").string() + ": " + ec.message());

  Manifest m;
  m.config = config;
  m.config_hash = config_hash;
  const std::size_t total = sample_count(config);
  m.records.reserve(total);
  for (std::size_t index = 0; index < total; ++index) {
    const RenderedSample s = render_sample(config, index);
    ManifestRecord r{"images/" + s.sample_id + ".ppm", s.label, s.domain_id, s.split};
    write_ppm((out_dir / r.relative_path).string(), s.image);
    m.records.push_back(std::move(r));
  }
  m.stats = measure_dominance(config);
  write_manifest(m, out_dir / "manifest.txt");
  return m;
}

std::string ManifestRecord::sample_id() const { return std::filesystem::path(relative_path).stem().string(); }

void write_manifest(const Manifest& m, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "# devdet-manifest 1\n";
  out << "# config " << nlohmann::json(m.config).dump() << "\n";
  out << "# seed " << m.config.seed << "\n";
  if (!m.config_hash.empty()) out << "# config_hash " << m.config_hash << "\n";
  out << "# stat inter_domain_distance " << format_double(m.stats.inter_domain_distance) << "\n";
  out << "# stat real_fake_distance " << format_double(m.stats.real_fake_distance) << "\n";
  out << "# stat trace_energy " << format_double(m.stats.trace_energy) << "\n";
  out << "# stat trace_ratio " << format_double(m.stats.trace_ratio) << "\n";
  out << "# stat dominance_factor " << format_double(m.stats.dominance_factor) << "\n";
  out << "relative_path\tlabel\tdomain_id\tsplit\n";
  for (const auto& r : m.records)
    out << r.relative_path << '\t' << r.label << '\t' << r.domain_id << '\t' << to_string(r.split) << '\n';
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << out.str();
  if (!f) throw IoError("write failed: " + path.string());
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw LoadError("cannot open manifest " + path.string());
  Manifest m;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(f, line)) {
    ++line_no;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      std::istringstream ls(line.substr(2));
      std::string key;
      ls >> key;
      try {
        if (key == "config") {
          std::string rest;
          std::getline(ls, rest);
          m.config = nlohmann::json::parse(rest).get<BenchmarkConfig>();
        } else if (key == "config_hash") {
          ls >> m.config_hash;
        } else if (key == "stat") {
          std::string name;
          double value = 0.0;
          ls >> name >> value;
          if (name == "inter_domain_distance") m.stats.inter_domain_distance = value;
          else if (name == "real_fake_distance") m.stats.real_fake_distance = value;
          else if (name == "trace_energy") m.stats.trace_energy = value;
          else if (name == "trace_ratio") m.stats.trace_ratio = value;
          else if (name == "dominance_factor") m.stats.dominance_factor = value;
        }
      } catch (const std::exception& e) {
        throw LoadError(where + ": malformed header: " + e.what());
      }
      continue;
    }
    if (!header_seen) {
      if (line != "relative_path\tlabel\tdomain_id\tsplit") throw LoadError(where + ": missing column header");
      header_seen = true;
      continue;
    }
    std::istringstream ls(line);
    ManifestRecord r;
    std::string label, domain, split, extra;
    if (!std::getline(ls, r.relative_path, '\t') || !std::getline(ls, label, '\t') || !std::getline(ls, domain, '\t') ||
        !std::getline(ls, split, '\t') || std::getline(ls, extra, '\t'))
      throw LoadError(where + ": expected 4 tab-separated fields");
    const std::string id = r.sample_id();
    if (label != "0" && label != "1") throw LoadError(where + ": sample " + id + " has invalid label '" + label + "'");
    r.label = label[0] - '0';
    try {
      std::size_t pos = 0;
      r.domain_id = std::stoi(domain, &pos);
      if (pos != domain.size()) throw std::invalid_argument(domain);
      r.split = split_from_string(split);
    } catch (const std::exception&) {
      throw LoadError(where + ": sample " + id + " has invalid domain_id or split");
    }
    m.records.push_back(std::move(r));
  }
  if (!header_seen) throw LoadError(path.string() + ": no records header");
  return m;
}

std::string to_string(TextureKind k) {
  switch (k) {
    case TextureKind::stripes: return "stripes";
    case TextureKind::checker: return "checker";
    case TextureKind::blobs: return "blobs";
    case TextureKind::gradient: return "gradient";
    case TextureKind::speckle: return "speckle";
  }
  return "?";
}

std::string to_string(TraceKind k) {
  switch (k) {
    case TraceKind::ellipse: return "ellipse";
    case TraceKind::ripple: return "ripple";
    case TraceKind::channel_offset: return "channel_offset";
  }
  return "?";
}

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

TextureKind texture_from_string(const std::string& s) {
  for (auto k : {TextureKind::stripes, TextureKind::checker, TextureKind::blobs, TextureKind::gradient, TextureKind::speckle})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown texture kind '" + s + "'");
}

TraceKind trace_from_string(const std::string& s) {
  for (auto k : {TraceKind::ellipse, TraceKind::ripple, TraceKind::channel_offset})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown trace kind '" + s + "'");
}

Split split_from_string(const std::string& s) {
  for (auto k : {Split::train, Split::val, Split::test})
    if (to_string(k) == s) return k;
  throw LoadError("unknown split '" + s + "'");
}

void to_json(nlohmann::json& j, const DomainSpec& d) {
  j = nlohmann::json{{"domain_id", d.domain_id},
                     {"texture", to_string(d.texture)},
                     {"color_mean", d.color_mean},
                     {"color_jitter", d.color_jitter},
                     {"texture_amplitude", d.texture_amplitude},
                     {"trace_amplitude", d.trace_amplitude},
                     {"trace", to_string(d.trace)}};
}

void from_json(const nlohmann::json& j, DomainSpec& d) {
  d.domain_id = j.at("domain_id").get<int>();
  d.texture = texture_from_string(j.at("texture").get<std::string>());
  d.color_mean = j.at("color_mean").get<std::array<double, 3>>();
  d.color_jitter = j.value("color_jitter", d.color_jitter);
  d.texture_amplitude = j.value("texture_amplitude", d.texture_amplitude);
  d.trace_amplitude = j.at("trace_amplitude").get<double>();
  d.trace = trace_from_string(j.at("trace").get<std::string>());
}

void to_json(nlohmann::json& j, const BenchmarkConfig& c) {
  j = nlohmann::json{{"domains", c.domains},
                     {"images_per_domain_per_class", c.images_per_domain_per_class},
                     {"image_size", c.image_size},
                     {"seed", c.seed},
                     {"holdout_domain_ids", c.holdout_domain_ids},
                     {"train_fraction", c.train_fraction},
                     {"val_fraction", c.val_fraction},
                     {"stats_samples_per_class", c.stats_samples_per_class}};
}

void from_json(const nlohmann::json& j, BenchmarkConfig& c) {
  c.domains = j.at("domains").get<std::vector<DomainSpec>>();
  c.images_per_domain_per_class = j.value("images_per_domain_per_class", c.images_per_domain_per_class);
  c.image_size = j.value("image_size", c.image_size);
  c.seed = j.value("seed", c.seed);
  c.holdout_domain_ids = j.value("holdout_domain_ids", c.holdout_domain_ids);
  c.train_fraction = j.value("train_fraction", c.train_fraction);
  c.val_fraction = j.value("val_fraction", c.val_fraction);
  c.stats_samples_per_class = j.value("stats_samples_per_class", c.stats_samples_per_class);
}

}  // namespace devdet::datagen
