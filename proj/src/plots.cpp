#include "devdet/plots.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "devdet/error.hpp"

namespace devdet::plots {

namespace {

using Rgb = std::array<double, 3>;

constexpr Rgb kReal{0.20, 0.40, 0.85};
constexpr Rgb kFake{0.85, 0.25, 0.20};
constexpr Rgb kAxis{0.15, 0.15, 0.15};

constexpr std::array<Rgb, 8> kPalette{{{0.85, 0.25, 0.20},
                                       {0.20, 0.55, 0.25},
                                       {0.20, 0.40, 0.85},
                                       {0.85, 0.60, 0.10},
                                       {0.55, 0.25, 0.70},
                                       {0.10, 0.65, 0.70},
                                       {0.50, 0.50, 0.50},
                                       {0.80, 0.40, 0.60}}};

void put(Image& img, int x, int y, const Rgb& c, double alpha = 1.0) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  for (int ch = 0; ch < 3; ++ch) img.at(ch, y, x) = (1.0 - alpha) * img.at(ch, y, x) + alpha * c[ch];
}

void rect(Image& img, int x0, int y0, int x1, int y1, const Rgb& c, double alpha = 1.0) {
  for (int y = std::max(0, y0); y <= std::min(img.height - 1, y1); ++y)
    for (int x = std::max(0, x0); x <= std::min(img.width - 1, x1); ++x) put(img, x, y, c, alpha);
}

}  // namespace

Image score_histogram(const std::vector<double>& scores, const std::vector<int>& labels, int bins, double threshold,
                      int width, int height) {
  if (scores.size() != labels.size()) throw ContractError("score_histogram: scores and labels differ in length");
  if (bins < 1 || width < 40 || height < 40) throw ContractError("score_histogram: bad plot geometry");
  std::array<std::vector<int>, 2> counts{std::vector<int>(bins, 0), std::vector<int>(bins, 0)};
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const int b = std::clamp(static_cast<int>(scores[i] * bins), 0, bins - 1);
    ++counts[labels[i] ? 1 : 0][b];
  }
  int peak = 1;
  for (const auto& c : counts) peak = std::max(peak, *std::max_element(c.begin(), c.end()));

  Image img(height, width, 1.0);
  const int margin = 10, plot_w = width - 2 * margin, plot_h = height - 2 * margin, base = height - margin;
  for (int cls = 0; cls < 2; ++cls)
    for (int b = 0; b < bins; ++b) {
      const int x0 = margin + b * plot_w / bins, x1 = margin + (b + 1) * plot_w / bins - 1;
      const int h = counts[cls][b] * plot_h / peak;
      rect(img, x0, base - h, x1, base, cls ? kFake : kReal, 0.5);
    }
  rect(img, margin, base, width - margin, base, kAxis);
  const int tx = margin + static_cast<int>(std::lround(threshold * plot_w));
  for (int y = margin; y < base; y += 4) rect(img, tx, y, tx, y + 1, kAxis);
  return img;
}

Eigen::MatrixXd pca_project(const Eigen::MatrixXd& Z, int dims) {
  if (Z.cols() < 1 || dims < 1 || dims > Z.rows()) throw ContractError("pca_project: bad dimensions");
  const Eigen::VectorXd mean = Z.rowwise().mean();
  const Eigen::MatrixXd centered = Z.colwise() - mean;
  const Eigen::MatrixXd cov = centered * centered.transpose() / static_cast<double>(Z.cols());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericError("pca_project: eigen decomposition failed");
  // Eigenvalues come in ascending order.
  Eigen::MatrixXd axes(Z.rows(), dims);
  for (int k = 0; k < dims; ++k) {
    Eigen::VectorXd v = solver.eigenvectors().col(Z.rows() - 1 - k);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    axes.col(k) = v;
  }
  return axes.transpose() * centered;
}

Image scatter(const Eigen::MatrixXd& points, const std::vector<int>& labels, const std::vector<int>& domains,
              int size) {
  if (points.rows() != 2 || static_cast<std::size_t>(points.cols()) != labels.size() ||
      labels.size() != domains.size())
    throw ContractError("scatter: expected a 2 x N projection with N labels and domains");
  Image img(size, size, 1.0);
  if (points.cols() == 0) return img;
  const int margin = 8;
  const double span = size - 2.0 * margin - 1.0;
  Eigen::Vector2d lo = points.rowwise().minCoeff(), hi = points.rowwise().maxCoeff();
  for (int r = 0; r < 2; ++r)
    if (hi(r) - lo(r) < 1e-12) hi(r) = lo(r) + 1.0;
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    const int x = margin + static_cast<int>(std::lround((points(0, i) - lo(0)) / (hi(0) - lo(0)) * span));
    const int y = margin + static_cast<int>(std::lround((hi(1) - points(1, i)) / (hi(1) - lo(1)) * span));
    const Rgb& c = kPalette[static_cast<std::size_t>(std::abs(domains[i])) % kPalette.size()];
    if (labels[i]) {
      rect(img, x - 2, y - 2, x + 2, y + 2, c);
    } else {
      rect(img, x - 2, y - 2, x + 2, y - 2, c);
      rect(img, x - 2, y + 2, x + 2, y + 2, c);
      rect(img, x - 2, y - 2, x - 2, y + 2, c);
      rect(img, x + 2, y - 2, x + 2, y + 2, c);
    }
  }
  return img;
}

}  // namespace devdet::plots
