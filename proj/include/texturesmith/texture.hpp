#pragma once

// Gram-matrix texture statistics. A layer's activations are viewed as an
// N x M matrix F (N filters, M spatial positions); its texture statistic is
// G = F F^T, and two images are compared layer-wise by
//
//   E = 1 / (4 N^2 M^2) * sum_ij (G_ij - Q_ij)^2,    loss = sum_l w_l E_l.
//
// dE/dF = (G - Q) F / (N^2 M^2). The positive-activation gate on that
// gradient is applied by relu_backward during network_backward, because
// texture layers are always taken after a relu.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "texturesmith/net.hpp"
#include "texturesmith/tensor.hpp"

namespace texturesmith {

struct FeatureMatrix {
  std::size_t n_filters = 0;
  std::size_t n_positions = 0;
  std::vector<float> values;  // row = filter, column = position

  float at(std::size_t i, std::size_t k) const { return values[i * n_positions + k]; }
  float& at(std::size_t i, std::size_t k) { return values[i * n_positions + k]; }
  bool operator==(const FeatureMatrix&) const = default;
};

struct GramMatrix {
  std::size_t n = 0;
  std::vector<float> values;  // n x n, row-major

  float at(std::size_t i, std::size_t j) const { return values[i * n + j]; }
  bool operator==(const GramMatrix&) const = default;
};

struct GramEntry {
  std::size_t layer_index = 0;
  float weight = 1.0f;
  std::size_t n_filters = 0;
  std::size_t n_positions = 0;
  GramMatrix gram;

  bool operator==(const GramEntry&) const = default;
};

/// Weighted Gram matrices over a set of layers: the texture descriptor.
struct GramSet {
  std::vector<GramEntry> entries;

  /// Layer indices strictly increasing, weights >= 0, matrix sizes consistent.
  void validate() const;
  std::vector<std::size_t> layers() const;
  bool operator==(const GramSet&) const = default;
};

FeatureMatrix flatten_features(const ImageTensor& activation);
ImageTensor unflatten_features(const FeatureMatrix& features, std::size_t height, std::size_t width);

/// G = F F^T, accumulated in 64-bit in ascending position order; each
/// unordered pair is computed once so the result is exactly symmetric.
GramMatrix gram(const FeatureMatrix& features);

double layer_loss(const GramMatrix& g, const GramMatrix& q, std::size_t n, std::size_t m);
double total_loss(std::span<const double> layer_losses, std::span<const double> weights);
FeatureMatrix layer_loss_gradient(const FeatureMatrix& features, const GramMatrix& g, const GramMatrix& q);

/// Uniform 1/L weights.
std::vector<float> uniform_layer_weights(std::size_t count);

/// Subtracts a per-channel offset. An empty mean is the identity.
ImageTensor preprocess(const ImageTensor& image, std::span<const float> channel_mean);

GramSet style_descriptor(const NetworkSpec& net, const ImageTensor& image, std::span<const std::size_t> layers,
                         std::span<const float> weights, std::span<const float> channel_mean = {});

/// TXSG descriptor format.
std::vector<std::uint8_t> serialize_gram_set(const GramSet& set);
GramSet load_gram_set(std::span<const std::uint8_t> bytes);

}  // namespace texturesmith
