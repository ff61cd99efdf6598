#pragma once

// Procedural multi-domain real/fake benchmark. Each domain is a texture family
// plus a base colour; fakes carry a faint, localized additive trace whose
// energy is small next to the differences between domains.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "devdet/image.hpp"
#include "devdet/rng.hpp"

namespace devdet::datagen {

enum class TextureKind { stripes, checker, blobs, gradient, speckle };
enum class TraceKind { ellipse, ripple, channel_offset };

struct DomainSpec {
  int domain_id = 0;
  TextureKind texture = TextureKind::stripes;
  std::array<double, 3> color_mean{0.5, 0.5, 0.5};
  double color_jitter = 0.02;
  double texture_amplitude = 0.08;
  double trace_amplitude = 0.1;
  TraceKind trace = TraceKind::ellipse;
};

enum class Split { train, val, test };

struct BenchmarkConfig {
  std::vector<DomainSpec> domains;
  int images_per_domain_per_class = 200;
  int image_size = 64;
  std::uint64_t seed = 7;
  std::vector<int> holdout_domain_ids;
  double train_fraction = 0.7;
  double val_fraction = 0.1;
  // Samples per (domain, class) entering the recorded dominance statistics.
  int stats_samples_per_class = 64;
};

// Every violated invariant, empty when valid.
std::vector<std::string> validate(const BenchmarkConfig& config);

struct DominanceStats {
  double inter_domain_distance = 0.0;  // mean L2 between images of different domains
  double real_fake_distance = 0.0;     // mean L2 between a real and a fake of one domain
  double trace_energy = 0.0;           // mean L2 norm of the injected trace (fakes)
  double trace_ratio = 0.0;            // trace_energy / inter_domain_distance
  double dominance_factor = 0.0;       // inter_domain_distance / real_fake_distance
};

struct ManifestRecord {
  std::string relative_path;
  int label = 0;  // 1 = fake
  int domain_id = 0;
  Split split = Split::train;
  std::string sample_id() const;  // file stem
};

struct Manifest {
  BenchmarkConfig config;
  DominanceStats stats;
  std::vector<ManifestRecord> records;
  std::string config_hash;  // producing run config; empty when standalone
};

// Localized additive trace: field(c, y, x) = amplitude * mask(y, x) * carrier(c, y, x).
struct TraceField {
  double amplitude = 0.0;
  std::vector<double> mask;  // H*W, values in [0, 1]
  Image carrier;             // values in [-1, 1]
  double coverage() const;   // fraction of pixels with mask > 0
};

TraceField make_trace(const DomainSpec& spec, int height, int width, Rng& rng);
Image apply_trace(const Image& image, const TraceField& trace);
Image inject_trace(const Image& image, const DomainSpec& spec, Rng& rng);

// Clean base image of a domain (texture + colour + sensor noise).
Image render_clean(const DomainSpec& spec, int size, Rng& rng);

struct RenderedSample {
  Image clean;
  Image image;  // clean for reals, clean + trace for fakes; quantized
  int label = 0;
  int domain_id = 0;
  Split split = Split::train;
  std::string sample_id;
};

std::size_t sample_count(const BenchmarkConfig& config);
// Sample `index` is fully determined by (config, index).
RenderedSample render_sample(const BenchmarkConfig& config, std::size_t index);

// Statistics over the first config.stats_samples_per_class samples of every
// (domain, class), computed on the quantized images that get written.
DominanceStats measure_dominance(const BenchmarkConfig& config);

Manifest generate_benchmark(const BenchmarkConfig& config, const std::filesystem::path& out_dir,
                            const std::string& config_hash = "");

void write_manifest(const Manifest& manifest, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

std::string to_string(TextureKind k);
std::string to_string(TraceKind k);
std::string to_string(Split s);
TextureKind texture_from_string(const std::string& s);
TraceKind trace_from_string(const std::string& s);
Split split_from_string(const std::string& s);

void to_json(nlohmann::json& j, const DomainSpec& d);
void from_json(const nlohmann::json& j, DomainSpec& d);
void to_json(nlohmann::json& j, const BenchmarkConfig& c);
void from_json(const nlohmann::json& j, BenchmarkConfig& c);

}  // namespace devdet::datagen
