#include "devdet/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

#include "devdet/error.hpp"

namespace devdet {

double quantize8(double v) {
  const double b = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
  return b / 255.0;
}

Image quantized(const Image& img) {
  Image out = img;
  for (double& v : out.pixels) v = quantize8(v);
  return out;
}

void write_ppm(const std::string& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(img.width) * Image::kChannels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < Image::kChannels; ++c)
        row[static_cast<std::size_t>(x) * Image::kChannels + c] =
            static_cast<unsigned char>(std::lround(std::clamp(img.at(c, y, x), 0.0, 1.0) * 255.0));
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw IoError("write failed: " + path);
}

Image read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255) throw LoadError("not an 8-bit P6 image: " + path);
  in.get();
  Image img(h, w);
  std::vector<unsigned char> row(static_cast<std::size_t>(w) * Image::kChannels);
  for (int y = 0; y < h; ++y) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
    if (!in) throw LoadError("truncated image: " + path);
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < Image::kChannels; ++c)
        img.at(c, y, x) = row[static_cast<std::size_t>(x) * Image::kChannels + c] / 255.0;
  }
  return img;
}

}  // namespace devdet
