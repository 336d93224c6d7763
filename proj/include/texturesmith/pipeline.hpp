#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "texturesmith/composite.hpp"
#include "texturesmith/config.hpp"
#include "texturesmith/error.hpp"
#include "texturesmith/net.hpp"
#include "texturesmith/texture.hpp"

namespace texturesmith {

/// Stage failure. Keeps the kind of the underlying error.
class PipelineError : public Error {
 public:
  PipelineError(std::string stage, ErrorKind kind, const std::string& what)
      : Error(kind, stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

std::string sha256_hex(std::span<const std::uint8_t> bytes);

/// TEXTURESMITH_CACHE_DIR, else $XDG_CACHE_HOME/texturesmith, else
/// ~/.cache/texturesmith.
std::filesystem::path default_cache_dir();

struct CachedDescriptor {
  GramSet descriptor;
  bool hit = false;
  std::filesystem::path file;
};

/// Descriptor of `style` through `net`, stored under `cache_dir` keyed by a
/// hash of the style pixels, the serialized network, the layer list, the
/// layer weights and the channel mean. An unreadable cache file is
/// recomputed and overwritten.
CachedDescriptor cache_descriptor(const ImageTensor& style, const NetworkSpec& net,
                                  std::span<const std::size_t> layers, std::span<const float> weights,
                                  std::span<const float> channel_mean, const std::filesystem::path& cache_dir);

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;  // base for relative output paths
  std::optional<std::uint64_t> seed;             // overrides the synthesis seed
  std::optional<std::filesystem::path> cache_dir;
  bool segment_only = false;
  Execution execution = Execution::Sequential;
};

struct StageTiming {
  std::string stage;
  double milliseconds = 0.0;
};

struct RegionReport {
  std::uint32_t label = 0;
  std::size_t pixels = 0;
  bool styled = false;
  bool cache_hit = false;
  std::size_t iterations = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::string stop;
};

struct RunReport {
  std::vector<StageTiming> timings;
  std::vector<RegionReport> regions;
  std::map<std::uint32_t, std::size_t> mask_pixels;
  std::vector<std::filesystem::path> outputs;
  std::string image_sha256;
  std::string config_echo;

  std::string to_json() const;
};

/// Load -> network -> segment -> descriptor -> synthesize -> write. Every
/// failure is rethrown as PipelineError naming the stage; files written
/// before the failure are removed.
RunReport run_pipeline(const PipelineConfig& cfg, const RunOptions& options = {});

/// Builds the network named by the config's network source.
NetworkSpec build_network(const NetworkSource& source, const std::filesystem::path& base_dir);

}  // namespace texturesmith
