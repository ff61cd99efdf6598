#pragma once

// Per-sample layer primitives with explicit backward passes. Activations are
// channel-planar tensors; parameters live in a flat vector addressed through
// offsets handed out by a ParamTable.

#include <span>
#include <string>
#include <vector>

#include "devdet/image.hpp"
#include "devdet/nn/params.hpp"
#include "devdet/rng.hpp"

namespace devdet::nn {

struct Tensor {
  int c = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int channels, int height, int width) : c(channels), h(height), w(width), v(static_cast<std::size_t>(channels) * height * width, 0.0) {}
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t size() const { return v.size(); }
  double* channel(int k) { return v.data() + k * plane(); }
  const double* channel(int k) const { return v.data() + k * plane(); }
};

Tensor from_image(const Image& img);
Image to_image(const Tensor& t);

// Activations and scratch buffers recorded by a forward pass for backward.
struct Tape {
  std::vector<Tensor> tensors;
  std::vector<std::vector<double>> buffers;
};

// 3x3 convolution with zero padding 1 and stride 1 or 2, lowered to im2col.
class Conv3x3 {
 public:
  Conv3x3() = default;
  Conv3x3(ParamTable& table, const std::string& name, int in_channels, int out_channels, int stride);

  int out_extent(int in) const { return stride_ == 1 ? in : (in + 1) / 2; }
  int in_channels() const { return in_; }
  int out_channels() const { return out_; }

  void forward(std::span<const double> theta, const Tensor& in, Tensor& out, std::vector<double>& cols) const;
  // Accumulates weight/bias gradients into dtheta (skipped when empty); writes din when non-null.
  void backward(std::span<const double> theta, const Tensor& in, const std::vector<double>& cols, const Tensor& dout,
                std::span<double> dtheta, Tensor* din) const;
  // He-normal weights scaled by `gain`, zero bias.
  void init(std::span<double> theta, Rng& rng, double gain = 1.0) const;

 private:
  int in_ = 0, out_ = 0, stride_ = 1;
  std::size_t w_off_ = 0, b_off_ = 0;
};

class Dense {
 public:
  Dense() = default;
  Dense(ParamTable& table, const std::string& name, int in_features, int out_features);

  int in_features() const { return in_; }
  int out_features() const { return out_; }

  void forward(std::span<const double> theta, std::span<const double> in, std::span<double> out) const;
  void backward(std::span<const double> theta, std::span<const double> in, std::span<const double> dout,
                std::span<double> dtheta, std::span<double> din) const;
  void init(std::span<double> theta, Rng& rng, double gain = 1.0) const;

 private:
  int in_ = 0, out_ = 0;
  std::size_t w_off_ = 0, b_off_ = 0;
};

void relu_inplace(std::span<double> v);
// grad[i] = 0 where the ReLU output was not positive.
void relu_backward(std::span<const double> out, std::span<double> grad);

void global_avg_pool(const Tensor& in, std::span<double> out);
void global_avg_pool_backward(std::span<const double> dout, Tensor& din);

// Nearest-neighbour 2x upsampling cropped to (h, w).
Tensor upsample2x(const Tensor& in, int h, int w);
Tensor upsample2x_backward(const Tensor& dout, int in_h, int in_w);

Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& ab, int a_channels, Tensor& da, Tensor& db);

}  // namespace devdet::nn
