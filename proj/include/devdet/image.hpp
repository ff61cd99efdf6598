#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace devdet {

// Three-channel image, channel-planar (CHW), real values nominally in [0, 1].
struct Image {
  static constexpr int kChannels = 3;

  int height = 0;
  int width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(int h, int w, double fill = 0.0)
      : height(h), width(w), pixels(static_cast<std::size_t>(kChannels) * h * w, fill) {}

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  std::size_t size() const { return pixels.size(); }
  double& at(int c, int y, int x) { return pixels[c * plane() + static_cast<std::size_t>(y) * width + x]; }
  double at(int c, int y, int x) const { return pixels[c * plane() + static_cast<std::size_t>(y) * width + x]; }
  std::span<double> channel(int c) { return {pixels.data() + c * plane(), plane()}; }
  std::span<const double> channel(int c) const { return {pixels.data() + c * plane(), plane()}; }

  bool same_shape(const Image& o) const { return height == o.height && width == o.width; }
  friend bool operator==(const Image&, const Image&) = default;
};

// Rounds to the 8-bit grid the images are stored on.
double quantize8(double v);
Image quantized(const Image& img);

// Binary PPM (P6), 8 bits per channel.
void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);

}  // namespace devdet
