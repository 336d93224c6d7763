#pragma once

#include <cstddef>
#include <optional>
#include <variant>
#include <vector>

#include "texturesmith/net.hpp"
#include "texturesmith/segment.hpp"
#include "texturesmith/synth.hpp"
#include "texturesmith/tensor.hpp"
#include "texturesmith/texture.hpp"

namespace texturesmith {

/// Style image with an optional mask; a masked style contributes only the
/// bounding box of its mask.
struct StyleImage {
  ImageTensor image;
  std::optional<Mask> mask;
};

/// Region that keeps the content pixels.
struct KeepContent {};

using RegionStyle = std::variant<GramSet, StyleImage, KeepContent>;

struct RegionEntry {
  Mask region;
  RegionStyle style;
  std::optional<SynthesisConfig> config;
};

struct RegionStyleMap {
  std::vector<RegionEntry> entries;

  /// At least one entry; masks match `height` x `width`, are binary and sum
  /// to exactly 1 at every pixel.
  void validate(std::size_t height, std::size_t width) const;
};

struct FeatherParams {
  std::size_t radius = 2;
  bool operator==(const FeatherParams&) const = default;
};

/// Box blur with a (2r+1)^2 window and edge replication.
Mask feather_mask(const Mask& mask, const FeatherParams& params);
std::vector<Mask> normalize_soft_masks(const std::vector<Mask>& masks);
/// Per-pixel sum of mask_r * image_r.
ImageTensor composite(const std::vector<ImageTensor>& region_images, const std::vector<Mask>& soft_masks);

/// Smallest rectangle holding every mask value >= 0.5.
struct BoundingBox {
  std::size_t y0 = 0, x0 = 0, height = 0, width = 0;
};
std::optional<BoundingBox> mask_bounding_box(const Mask& mask);

/// Descriptor of a style image, cropped to its mask when it has one.
GramSet region_style_descriptor(const StyleImage& style, const NetworkSpec& net, const SynthesisConfig& cfg);

struct RegionOutcome {
  ImageTensor image;
  LossTrace trace;
  double final_loss = 0.0;
  StopReason stop = StopReason::MaxIterations;
};

struct RegionSynthesis {
  ImageTensor image;
  std::vector<RegionOutcome> regions;
  std::vector<Mask> soft_masks;
};

enum class Execution { Sequential, Concurrent };

/// Synthesizes every region over the full content image (ContentImage init),
/// then blends with feathered, normalized masks. Result does not depend on
/// `execution`.
RegionSynthesis per_region_synthesize(const ImageTensor& content, const RegionStyleMap& map, const NetworkSpec& net,
                                      const SynthesisConfig& cfg, const FeatherParams& feather,
                                      Execution execution = Execution::Sequential);

}  // namespace texturesmith
