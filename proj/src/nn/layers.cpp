#include "devdet/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "devdet/error.hpp"
#include "devdet/simd/kernels.hpp"

namespace devdet::nn {

Tensor from_image(const Image& img) {
  Tensor t(Image::kChannels, img.height, img.width);
  t.v = img.pixels;
  return t;
}

Image to_image(const Tensor& t) {
  if (t.c != Image::kChannels) throw ContractError("tensor is not a 3-channel image");
  Image img(t.h, t.w);
  img.pixels = t.v;
  return img;
}

Conv3x3::Conv3x3(ParamTable& table, const std::string& name, int in_channels, int out_channels, int stride)
    : in_(in_channels), out_(out_channels), stride_(stride) {
  if (stride != 1 && stride != 2) throw ContractError("conv stride must be 1 or 2");
  w_off_ = table.add(name + ".w", {out_channels, in_channels, 3, 3});
  b_off_ = table.add(name + ".b", {out_channels});
}

void Conv3x3::forward(std::span<const double> theta, const Tensor& in, Tensor& out, std::vector<double>& cols) const {
  if (in.c != in_) throw ContractError("conv input channel mismatch");
  const int ho = out_extent(in.h), wo = out_extent(in.w);
  const std::size_t p = static_cast<std::size_t>(ho) * wo;
  const std::size_t k_dim = static_cast<std::size_t>(in_) * 9;
  cols.assign(k_dim * p, 0.0);
  for (int ci = 0; ci < in_; ++ci) {
    const double* src = in.channel(ci);
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        double* row = cols.data() + (static_cast<std::size_t>(ci) * 9 + ky * 3 + kx) * p;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride_ + ky - 1;
          if (iy < 0 || iy >= in.h) continue;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride_ + kx - 1;
            if (ix >= 0 && ix < in.w) row[static_cast<std::size_t>(oy) * wo + ox] = src[static_cast<std::size_t>(iy) * in.w + ix];
          }
        }
      }
  }
  out = Tensor(out_, ho, wo);
  const auto& k = simd::active();
  for (int o = 0; o < out_; ++o) {
    double* dst = out.channel(o);
    std::fill(dst, dst + p, theta[b_off_ + o]);
    const double* w = theta.data() + w_off_ + static_cast<std::size_t>(o) * k_dim;
    for (std::size_t j = 0; j < k_dim; ++j)
      if (w[j] != 0.0) k.axpy(w[j], cols.data() + j * p, dst, p);
  }
}

void Conv3x3::backward(std::span<const double> theta, const Tensor& in, const std::vector<double>& cols,
                       const Tensor& dout, std::span<double> dtheta, Tensor* din) const {
  const std::size_t p = dout.plane();
  const std::size_t k_dim = static_cast<std::size_t>(in_) * 9;
  const auto& k = simd::active();
  std::vector<double> dcols;
  if (din != nullptr) dcols.assign(k_dim * p, 0.0);
  for (int o = 0; o < out_; ++o) {
    const double* g = dout.channel(o);
    if (!dtheta.empty()) {
      double gsum = 0.0;
      for (std::size_t i = 0; i < p; ++i) gsum += g[i];
      dtheta[b_off_ + o] += gsum;
      double* dw = dtheta.data() + w_off_ + static_cast<std::size_t>(o) * k_dim;
      for (std::size_t j = 0; j < k_dim; ++j) dw[j] += k.dot(g, cols.data() + j * p, p);
    }
    if (din != nullptr) {
      const double* w = theta.data() + w_off_ + static_cast<std::size_t>(o) * k_dim;
      for (std::size_t j = 0; j < k_dim; ++j)
        if (w[j] != 0.0) k.axpy(w[j], g, dcols.data() + j * p, p);
    }
  }
  if (din == nullptr) return;
  *din = Tensor(in.c, in.h, in.w);
  const int wo = dout.w, ho = dout.h;
  for (int ci = 0; ci < in_; ++ci) {
    double* dst = din->channel(ci);
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        const double* row = dcols.data() + (static_cast<std::size_t>(ci) * 9 + ky * 3 + kx) * p;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride_ + ky - 1;
          if (iy < 0 || iy >= in.h) continue;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride_ + kx - 1;
            if (ix >= 0 && ix < in.w) dst[static_cast<std::size_t>(iy) * in.w + ix] += row[static_cast<std::size_t>(oy) * wo + ox];
          }
        }
      }
  }
}

void Conv3x3::init(std::span<double> theta, Rng& rng, double gain) const {
  const double std = gain * std::sqrt(2.0 / (9.0 * in_));
  const std::size_t n = static_cast<std::size_t>(out_) * in_ * 9;
  for (std::size_t i = 0; i < n; ++i) theta[w_off_ + i] = std * rng.normal();
  for (int o = 0; o < out_; ++o) theta[b_off_ + o] = 0.0;
}

Dense::Dense(ParamTable& table, const std::string& name, int in_features, int out_features)
    : in_(in_features), out_(out_features) {
  w_off_ = table.add(name + ".w", {out_features, in_features});
  b_off_ = table.add(name + ".b", {out_features});
}

void Dense::forward(std::span<const double> theta, std::span<const double> in, std::span<double> out) const {
  if (static_cast<int>(in.size()) != in_ || static_cast<int>(out.size()) != out_) throw ContractError("dense shape mismatch");
  const auto& k = simd::active();
  for (int o = 0; o < out_; ++o)
    out[o] = theta[b_off_ + o] + k.dot(theta.data() + w_off_ + static_cast<std::size_t>(o) * in_, in.data(), in.size());
}

void Dense::backward(std::span<const double> theta, std::span<const double> in, std::span<const double> dout,
                     std::span<double> dtheta, std::span<double> din) const {
  const auto& k = simd::active();
  if (!din.empty()) std::fill(din.begin(), din.end(), 0.0);
  for (int o = 0; o < out_; ++o) {
    const double g = dout[o];
    if (g == 0.0) continue;
    if (!dtheta.empty()) {
      dtheta[b_off_ + o] += g;
      k.axpy(g, in.data(), dtheta.data() + w_off_ + static_cast<std::size_t>(o) * in_, in.size());
    }
    if (!din.empty()) k.axpy(g, theta.data() + w_off_ + static_cast<std::size_t>(o) * in_, din.data(), din.size());
  }
}

void Dense::init(std::span<double> theta, Rng& rng, double gain) const {
  const double std = gain * std::sqrt(2.0 / in_);
  const std::size_t n = static_cast<std::size_t>(out_) * in_;
  for (std::size_t i = 0; i < n; ++i) theta[w_off_ + i] = std * rng.normal();
  for (int o = 0; o < out_; ++o) theta[b_off_ + o] = 0.0;
}

void relu_inplace(std::span<double> v) {
  for (double& x : v) x = x > 0.0 ? x : 0.0;
}

void relu_backward(std::span<const double> out, std::span<double> grad) {
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!(out[i] > 0.0)) grad[i] = 0.0;
}

void global_avg_pool(const Tensor& in, std::span<double> out) {
  const std::size_t p = in.plane();
  for (int c = 0; c < in.c; ++c) {
    const double* src = in.channel(c);
    double s = 0.0;
    for (std::size_t i = 0; i < p; ++i) s += src[i];
    out[c] = s / static_cast<double>(p);
  }
}

void global_avg_pool_backward(std::span<const double> dout, Tensor& din) {
  const std::size_t p = din.plane();
  for (int c = 0; c < din.c; ++c) std::fill(din.channel(c), din.channel(c) + p, dout[c] / static_cast<double>(p));
}

Tensor upsample2x(const Tensor& in, int h, int w) {
  Tensor out(in.c, h, w);
  for (int c = 0; c < in.c; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out.channel(c)[static_cast<std::size_t>(y) * w + x] = in.channel(c)[static_cast<std::size_t>(y / 2) * in.w + x / 2];
  return out;
}

Tensor upsample2x_backward(const Tensor& dout, int in_h, int in_w) {
  Tensor din(dout.c, in_h, in_w);
  for (int c = 0; c < dout.c; ++c)
    for (int y = 0; y < dout.h; ++y)
      for (int x = 0; x < dout.w; ++x)
        din.channel(c)[static_cast<std::size_t>(y / 2) * in_w + x / 2] += dout.channel(c)[static_cast<std::size_t>(y) * dout.w + x];
  return din;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.h != b.h || a.w != b.w) throw ContractError("concat spatial mismatch");
  Tensor out(a.c + b.c, a.h, a.w);
  std::copy(a.v.begin(), a.v.end(), out.v.begin());
  std::copy(b.v.begin(), b.v.end(), out.v.begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

void split_channels(const Tensor& ab, int a_channels, Tensor& da, Tensor& db) {
  da = Tensor(a_channels, ab.h, ab.w);
  db = Tensor(ab.c - a_channels, ab.h, ab.w);
  std::copy(ab.v.begin(), ab.v.begin() + static_cast<std::ptrdiff_t>(da.size()), da.v.begin());
  std::copy(ab.v.begin() + static_cast<std::ptrdiff_t>(da.size()), ab.v.end(), db.v.begin());
}

}  // namespace devdet::nn
