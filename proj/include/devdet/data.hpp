#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "devdet/datagen.hpp"
#include "devdet/image.hpp"

namespace devdet {

struct Sample {
  std::shared_ptr<const Image> image;
  int label = 0;  // 1 = fake
  int domain_id = 0;
  std::string sample_id;
  datagen::Split split = datagen::Split::train;
};

// Immutable after construction; copies share pixel buffers.
struct SampleSet {
  std::string name;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::size_t count_label(int label) const;
  SampleSet filter(std::string new_name, const std::function<bool(const Sample&)>& keep) const;
};

// Loads every record of a datagen manifest. Throws LoadError naming the
// offending record (missing file, bad label, out-of-range pixel, ...).
SampleSet load_manifest(const std::filesystem::path& manifest_path);

// Writes images and a manifest that load_manifest reads back element-wise
// identical (pixels must already lie on the 8-bit grid).
void save_sample_set(const SampleSet& set, const std::filesystem::path& out_dir);

SampleSet split_of(const SampleSet& set, datagen::Split split, const std::vector<int>& exclude_domains = {});
SampleSet domains_of(const SampleSet& set, datagen::Split split, const std::vector<int>& domains);

// Index batches of one epoch: a permutation seeded by (seed, epoch), last
// partial batch kept.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed, int epoch);

class BatchStream {
 public:
  BatchStream(const SampleSet& set, std::size_t batch_size, std::uint64_t seed);
  // Next batch of the current epoch, or nullopt at the epoch's end (the
  // following call starts the next epoch).
  std::optional<std::vector<const Sample*>> next();
  int epoch() const { return epoch_; }

 private:
  const SampleSet* set_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  int epoch_ = 0;
  std::size_t cursor_ = 0;
  std::vector<std::vector<std::size_t>> batches_;
};

struct AugmentConfig {
  double flip_probability = 0.5;
  double brightness_contrast_probability = 0.5;
  double max_brightness = 0.03;     // additive shift in [-b, b]
  double max_contrast = 0.05;       // gain in [1-c, 1+c] around 0.5
};

// Horizontal flip and brightness/contrast jitter, reproducible from
// (seed, epoch, sample_id).
Image augment(const Image& image, const AugmentConfig& config, std::uint64_t seed, int epoch, const std::string& sample_id);

}  // namespace devdet
