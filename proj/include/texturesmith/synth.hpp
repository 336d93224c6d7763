#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "texturesmith/net.hpp"
#include "texturesmith/tensor.hpp"
#include "texturesmith/texture.hpp"

namespace texturesmith {

enum class InitMode { ContentImage, WhiteNoise };

struct SynthesisConfig {
  /// Texture layers and their weights; empty means default_style_layers()
  /// with uniform weights.
  std::vector<std::size_t> layer_indices;
  std::vector<float> layer_weights;
  InitMode init_mode = InitMode::ContentImage;
  /// Initial step of every line search.
  double step_size = 1.0e7;
  std::size_t max_iterations = 500;
  /// Stop once a step changes the loss by at most tol * previous loss.
  double convergence_tol = 1.0e-6;
  float clamp_lo = 0.0f;
  float clamp_hi = 1.0f;
  std::uint64_t rng_seed = 0;
  /// Optional per-channel offset subtracted before the network.
  std::vector<float> channel_mean;
  std::size_t max_halvings = 20;

  void validate() const;
  /// Layer list and weights with defaults resolved against `net`.
  std::vector<std::size_t> resolved_layers(const NetworkSpec& net) const;
  std::vector<float> resolved_weights(const NetworkSpec& net) const;
  bool operator==(const SynthesisConfig&) const = default;
};

struct LossRecord {
  std::size_t iteration = 0;  // 1-based
  double total = 0.0;
  std::vector<double> layer_losses;
};

struct LossTrace {
  std::vector<LossRecord> records;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }
  /// CSV with header `iter,total,E_l0,E_l1,...`, 9 significant digits.
  void write_csv(std::ostream& out) const;
  std::string to_csv() const;
};

/// Loss of an image against a target descriptor, keeping what the gradient
/// computation needs.
struct TextureEvaluation {
  double loss = 0.0;
  std::vector<double> layer_losses;
  ActivationTrace trace;
  std::vector<GramMatrix> grams;
  /// Target Grams rescaled to this image's position count.
  std::vector<GramMatrix> targets;
};

TextureEvaluation evaluate_texture(const ImageTensor& image, const GramSet& target, const NetworkSpec& net,
                                   std::span<const float> channel_mean = {});
/// Pixel gradient of `eval.loss`: w_l * dE_l/dF injected at every texture
/// layer and swept back through the network.
ImageTensor texture_gradient(const TextureEvaluation& eval, const GramSet& target, const NetworkSpec& net);

/// True when every Gram entry matches the target within 1e-10 (relative
/// above magnitude 1).
bool matches_target(const TextureEvaluation& eval);

/// ContentImage copies `content`. WhiteNoise draws i.i.d. uniform values in
/// [lo, hi) with `content`'s shape.
ImageTensor init_image(InitMode mode, const ImageTensor& content, std::uint64_t seed, float lo, float hi);

struct StepResult {
  ImageTensor image;
  double loss = 0.0;  // before the step
  std::vector<double> layer_losses;
};

/// One fixed-size step: y - step_size * grad, clamped.
StepResult synthesis_step(const ImageTensor& y, const GramSet& target, const NetworkSpec& net,
                          const SynthesisConfig& cfg);

enum class StopReason { MaxIterations, Converged, FixedPoint, LineSearchFailed };
const char* stop_reason_name(StopReason reason) noexcept;

struct SynthesisResult {
  ImageTensor image;
  LossTrace trace;
  double final_loss = 0.0;
  StopReason stop = StopReason::MaxIterations;
};

/// Gradient descent with backtracking (halve while the trial loss exceeds the
/// current loss). A step is only taken when it does not increase the loss, so
/// the trace is non-increasing. Throws NumericalError on a non-finite loss.
SynthesisResult synthesize(const ImageTensor& content, const GramSet& target, const NetworkSpec& net,
                           const SynthesisConfig& cfg);

}  // namespace texturesmith
