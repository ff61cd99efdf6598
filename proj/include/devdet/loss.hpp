#pragma once

namespace devdet {

// Confidences are clamped to [kMinConfidence, 1 - kMinConfidence] before the log.
inline constexpr double kMinConfidence = 1e-7;

// -(y log p + (1 - y) log(1 - p)).
double cross_entropy(double confidence, int label);

// d cross_entropy(sigmoid(l), y) / dl = sigmoid(l) - y. The clamp is ignored
// here so saturated predictions still receive a gradient.
inline double cross_entropy_dlogit(double confidence, int label) { return confidence - static_cast<double>(label); }

}  // namespace devdet
