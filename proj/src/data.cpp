#include "devdet/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "devdet/error.hpp"
#include "devdet/hash.hpp"
#include "devdet/rng.hpp"

namespace devdet {

std::size_t SampleSet::count_label(int label) const {
  return static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [&](const Sample& s) { return s.label == label; }));
}

SampleSet SampleSet::filter(std::string new_name, const std::function<bool(const Sample&)>& keep) const {
  SampleSet out{std::move(new_name), {}};
  for (const auto& s : samples)
    if (keep(s)) out.samples.push_back(s);
  return out;
}

SampleSet load_manifest(const std::filesystem::path& manifest_path) {
  const datagen::Manifest m = datagen::read_manifest(manifest_path);
  const auto root = manifest_path.parent_path();
  SampleSet set{manifest_path.stem().string(), {}};
  set.samples.reserve(m.records.size());
  std::vector<std::string> ids;
  for (const auto& r : m.records) {
    const std::string id = r.sample_id();
    Image img;
    try {
      img = read_ppm((root / r.relative_path).string());
    } catch (const Error& e) {
      throw LoadError("sample " + id + ": " + e.what());
    }
    for (double v : img.pixels)
      if (!(v >= 0.0 && v <= 1.0)) throw LoadError("sample " + id + ": pixel out of range");
    if (!set.samples.empty() && !img.same_shape(*set.samples.front().image))
      throw LoadError("sample " + id + ": image size differs from the rest of the manifest");
    set.samples.push_back(Sample{std::make_shared<const Image>(std::move(img)), r.label, r.domain_id, id, r.split});
    ids.push_back(id);
  }
  std::sort(ids.begin(), ids.end());
  if (auto dup = std::adjacent_find(ids.begin(), ids.end()); dup != ids.end())
    throw LoadError("duplicate sample_id " + *dup);
  return set;
}

void save_sample_set(const SampleSet& set, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  datagen::Manifest m;
  for (const auto& s : set.samples) {
    datagen::ManifestRecord r{"images/" + s.sample_id + ".ppm", s.label, s.domain_id, s.split};
    write_ppm((out_dir / r.relative_path).string(), *s.image);
    m.records.push_back(std::move(r));
  }
  datagen::write_manifest(m, out_dir / "manifest.txt");
}

SampleSet split_of(const SampleSet& set, datagen::Split split, const std::vector<int>& exclude_domains) {
  return set.filter(set.name + "/" + datagen::to_string(split), [&](const Sample& s) {
    return s.split == split && std::find(exclude_domains.begin(), exclude_domains.end(), s.domain_id) == exclude_domains.end();
  });
}

SampleSet domains_of(const SampleSet& set, datagen::Split split, const std::vector<int>& domains) {
  return set.filter(set.name + "/" + datagen::to_string(split) + "/domains", [&](const Sample& s) {
    return s.split == split && std::find(domains.begin(), domains.end(), s.domain_id) != domains.end();
  });
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed, int epoch) {
  if (batch_size == 0) throw ContractError("batch_size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(substream(seed, static_cast<std::uint64_t>(epoch)));
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < n; i += batch_size)
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size)));
  return batches;
}

BatchStream::BatchStream(const SampleSet& set, std::size_t batch_size, std::uint64_t seed)
    : set_(&set), batch_size_(batch_size), seed_(seed) {
  batches_ = epoch_batches(set.size(), batch_size_, seed_, epoch_);
}

std::optional<std::vector<const Sample*>> BatchStream::next() {
  if (cursor_ == batches_.size()) {
    ++epoch_;
    cursor_ = 0;
    batches_ = epoch_batches(set_->size(), batch_size_, seed_, epoch_);
    return std::nullopt;
  }
  std::vector<const Sample*> out;
  for (std::size_t i : batches_[cursor_]) out.push_back(&set_->samples[i]);
  ++cursor_;
  return out;
}

Image augment(const Image& image, const AugmentConfig& config, std::uint64_t seed, int epoch, const std::string& sample_id) {
  Rng rng(substream(substream(seed, static_cast<std::uint64_t>(epoch)), sample_id));
  Image out = image;
  if (rng.bernoulli(config.flip_probability)) {
    for (int c = 0; c < Image::kChannels; ++c)
      for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) out.at(c, y, x) = image.at(c, y, out.width - 1 - x);
  }
  if (rng.bernoulli(config.brightness_contrast_probability)) {
    const double brightness = rng.uniform(-config.max_brightness, config.max_brightness);
    const double contrast = rng.uniform(1.0 - config.max_contrast, 1.0 + config.max_contrast);
    for (double& v : out.pixels) v = std::clamp((v - 0.5) * contrast + 0.5 + brightness, 0.0, 1.0);
  }
  return out;
}

}  // namespace devdet
