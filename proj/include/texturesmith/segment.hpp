#pragma once

// Dense-CRF segmentation by mean-field inference. Pairwise energies are
// Potts-weighted sums of two Gaussian kernels over all pixel pairs:
//
//   k(i, j) = w_app    * exp(-|p_i - p_j|^2 / 2 theta_alpha^2 - |I_i - I_j|^2 / 2 theta_beta^2)
//           + w_smooth * exp(-|p_i - p_j|^2 / 2 theta_gamma^2)
//
// One mean-field step computes, per pixel i and label l,
//   message(i, l) = sum_{j != i} k(i, j) sum_{l'} mu(l, l') Q_j(l')
// and renormalizes Q_i(l) ~ exp(-U_i(l) - message(i, l)). Messages are summed
// exactly over all pairs (O(N^2)), intended for images up to ~128 x 128.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "texturesmith/tensor.hpp"

namespace texturesmith {

/// Per-pixel, per-label energies (negative log-probabilities); labels
/// innermost.
struct UnaryField {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t n_labels = 0;
  std::vector<float> values;

  float at(std::size_t pixel, std::size_t label) const { return values[pixel * n_labels + label]; }
  float& at(std::size_t pixel, std::size_t label) { return values[pixel * n_labels + label]; }
  std::size_t pixels() const noexcept { return height * width; }
  void validate() const;
  bool operator==(const UnaryField&) const = default;
};

struct MarginalField {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t n_labels = 0;
  std::vector<double> values;  // pixel-major, labels innermost

  double at(std::size_t pixel, std::size_t label) const { return values[pixel * n_labels + label]; }
  std::size_t pixels() const noexcept { return height * width; }
  bool operator==(const MarginalField&) const = default;
};

struct PairwiseParams {
  double w_appearance = 3.0;
  double theta_alpha = 8.0;  // pixels
  double theta_beta = 0.1;   // [0, 1] colour units
  double w_smooth = 1.0;
  double theta_gamma = 3.0;  // pixels

  void validate() const;
  bool operator==(const PairwiseParams&) const = default;
};

/// Per-pixel membership in [0, 1], row-major.
struct Mask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  Mask() = default;
  Mask(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), values(h * w, fill) {}

  double at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
  double& at(std::size_t y, std::size_t x) { return values[y * width + x]; }
  std::size_t count_members() const noexcept;
  bool operator==(const Mask&) const = default;
};

struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t n_labels = 0;
  std::vector<std::uint32_t> labels;

  bool operator==(const LabelMap&) const = default;
};

struct Pixel {
  std::size_t row = 0;
  std::size_t col = 0;
  bool operator==(const Pixel&) const = default;
};

/// Two-label unary from the mean colours of seed pixels:
/// U(p, l) = |colour(p) - mean_l|^2 / (2 sigma^2), background = 0,
/// foreground = 1.
UnaryField color_model_unary(const ImageTensor& image, std::span<const Pixel> fg_seeds,
                             std::span<const Pixel> bg_seeds, double sigma = 0.1);

/// UNRY file format.
std::vector<std::uint8_t> serialize_unary(const UnaryField& unary);
UnaryField load_unary(std::span<const std::uint8_t> bytes);

MarginalField meanfield_init(const UnaryField& unary);
MarginalField meanfield_step(const MarginalField& q, const UnaryField& unary, const ImageTensor& image,
                             const PairwiseParams& params);

/// Hard labels by per-pixel argmax; ties go to the lower label.
LabelMap argmax_labels(const MarginalField& q);
/// One binary mask per label.
std::vector<Mask> extract_region_masks(const LabelMap& labels);

struct CrfResult {
  LabelMap labels;
  std::vector<Mask> masks;
  MarginalField marginals;
};

CrfResult run_crf(const UnaryField& unary, const ImageTensor& image, const PairwiseParams& params,
                  std::size_t iterations = 5);

}  // namespace texturesmith
