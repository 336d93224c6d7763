#pragma once

// Flat `key = value` pipeline configuration. Lines starting with `#`, and
// text after a whitespace-preceded `#`, are comments. Keys:
//
//   content                          content image (required)
//   style.<label>, style_mask.<label>  style image per label (0/bg, 1/fg, ...)
//   weights | test_net.seed/.depth/.channels   network source (exactly one)
//   unary | seeds.fg + seeds.bg | mask         segmentation source (exactly one)
//   crf.w_app crf.theta_alpha crf.theta_beta crf.w_smooth crf.theta_gamma crf.iters
//   synth.layers synth.weights synth.init synth.step synth.max_iters synth.tol synth.mean
//   feather.radius
//   out.image (required), out.masks, out.trace  (the last two are directories)
//
// Seed lists are `row,col` pairs separated by `;`.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "texturesmith/composite.hpp"
#include "texturesmith/segment.hpp"
#include "texturesmith/synth.hpp"

namespace texturesmith {

struct StyleEntry {
  std::string image;
  std::optional<std::string> mask;
  bool operator==(const StyleEntry&) const = default;
};

struct WeightsFile {
  std::string path;
  bool operator==(const WeightsFile&) const = default;
};

struct TestNetSource {
  std::uint64_t seed = 0;
  std::size_t depth = 3;
  std::size_t channels = 8;
  bool operator==(const TestNetSource&) const = default;
};

using NetworkSource = std::variant<WeightsFile, TestNetSource>;

struct UnaryFile {
  std::string path;
  bool operator==(const UnaryFile&) const = default;
};

struct SeedLists {
  std::vector<Pixel> fg;
  std::vector<Pixel> bg;
  bool operator==(const SeedLists&) const = default;
};

/// External label image: pixels >= 0.5 are label 1 (foreground), others 0.
struct MaskFile {
  std::string path;
  bool operator==(const MaskFile&) const = default;
};

using SegmentationSource = std::variant<UnaryFile, SeedLists, MaskFile>;

struct PipelineConfig {
  std::string content;
  std::map<std::uint32_t, StyleEntry> styles;
  NetworkSource network;
  SegmentationSource segmentation;
  PairwiseParams crf;
  std::size_t crf_iterations = 5;
  SynthesisConfig synth;
  FeatherParams feather;
  std::string out_image;
  std::optional<std::string> out_masks;
  std::optional<std::string> out_trace;

  /// Relative input paths resolve against this directory. Not emitted.
  std::filesystem::path base_dir;

  bool operator==(const PipelineConfig&) const;
};

/// Throws ConfigError with the offending line for syntax errors, unknown or
/// duplicate keys and malformed values; missing required keys and
/// conflicting sources are reported without a line.
PipelineConfig parse_config(std::string_view text);
/// Reads and parses a file; `base_dir` becomes the file's directory.
PipelineConfig load_config(const std::filesystem::path& path);
/// Canonical text form; parse_config(emit_config(c)) == c.
std::string emit_config(const PipelineConfig& config);

}  // namespace texturesmith
