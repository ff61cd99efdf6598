// Static report figures: score histograms and 2-D feature projections,
// rendered straight into images for PPM output.
#pragma once

#include <vector>

#include <Eigen/Dense>

#include "devdet/image.hpp"

namespace devdet::plots {

// Overlaid per-class histograms of scores in [0, 1]; reals blue, fakes red,
// dashed vertical line at the threshold.
Image score_histogram(const std::vector<double>& scores, const std::vector<int>& labels, int bins, double threshold,
                      int width = 320, int height = 200);

// Projection of the columns of Z onto their top `dims` principal axes
// (dims x N). Each axis is sign-fixed so its largest-magnitude loading is
// positive, which makes the output deterministic.
Eigen::MatrixXd pca_project(const Eigen::MatrixXd& Z, int dims = 2);

// Scatter of a 2 x N projection; colour by domain, filled squares for fakes,
// hollow squares for reals.
Image scatter(const Eigen::MatrixXd& points, const std::vector<int>& labels, const std::vector<int>& domains,
              int size = 320);

}  // namespace devdet::plots
