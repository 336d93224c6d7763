#include "texturesmith/pipeline.hpp"

#include <openssl/evp.h>

#include <bit>
#include <chrono>
#include <cstdlib>
#include <fstream>

#include "json.hpp"

#include "texturesmith/image_io.hpp"
#include "texturesmith/segment.hpp"
#include "texturesmith/synth.hpp"

namespace texturesmith {

namespace fs = std::filesystem;

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw IoError("sha256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

fs::path default_cache_dir() {
  if (const char* dir = std::getenv("TEXTURESMITH_CACHE_DIR"); dir && *dir) return dir;
  if (const char* xdg = std::getenv("XDG_CACHE_HOME"); xdg && *xdg) return fs::path(xdg) / "texturesmith";
  if (const char* home = std::getenv("HOME"); home && *home) return fs::path(home) / ".cache" / "texturesmith";
  return fs::temp_directory_path() / "texturesmith-cache";
}

namespace {

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void append_floats(std::vector<std::uint8_t>& out, std::span<const float> values) {
  append_u32(out, static_cast<std::uint32_t>(values.size()));
  for (float v : values) append_u32(out, std::bit_cast<std::uint32_t>(v));
}

}  // namespace

CachedDescriptor cache_descriptor(const ImageTensor& style, const NetworkSpec& net,
                                  std::span<const std::size_t> layers, std::span<const float> weights,
                                  std::span<const float> channel_mean, const fs::path& cache_dir) {
  std::vector<std::uint8_t> key;
  const std::string_view tag = "texturesmith-gram-v1";
  key.insert(key.end(), tag.begin(), tag.end());
  append_u32(key, static_cast<std::uint32_t>(style.channels()));
  append_u32(key, static_cast<std::uint32_t>(style.height()));
  append_u32(key, static_cast<std::uint32_t>(style.width()));
  append_floats(key, style.values());
  const auto net_bytes = serialize_weights(net);
  append_u32(key, static_cast<std::uint32_t>(net_bytes.size()));
  key.insert(key.end(), net_bytes.begin(), net_bytes.end());
  append_u32(key, static_cast<std::uint32_t>(layers.size()));
  for (std::size_t l : layers) append_u32(key, static_cast<std::uint32_t>(l));
  append_floats(key, weights);
  append_floats(key, channel_mean);

  CachedDescriptor out;
  out.file = cache_dir / (sha256_hex(key) + ".txsg");
  std::error_code ec;
  if (fs::exists(out.file, ec)) {
    try {
      GramSet cached = load_gram_set(read_file(out.file));
      if (cached.layers() == std::vector<std::size_t>(layers.begin(), layers.end())) {
        out.descriptor = std::move(cached);
        out.hit = true;
        return out;
      }
    } catch (const Error&) {
      // Corrupt entry: fall through, recompute and overwrite.
    }
  }

  out.descriptor = style_descriptor(net, style, layers, weights, channel_mean);
  fs::create_directories(cache_dir, ec);
  if (ec) throw IoError("cannot create cache directory " + cache_dir.string() + ": " + ec.message());
  const fs::path tmp = out.file.string() + ".tmp";
  write_file(tmp, serialize_gram_set(out.descriptor));
  fs::rename(tmp, out.file, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot store cache entry " + out.file.string());
  }
  return out;
}

NetworkSpec build_network(const NetworkSource& source, const fs::path& base_dir) {
  if (const auto* w = std::get_if<WeightsFile>(&source)) {
    const fs::path p = fs::path(w->path).is_absolute() ? fs::path(w->path) : base_dir / w->path;
    return load_weights(read_file(p));
  }
  const auto& t = std::get<TestNetSource>(source);
  return seeded_test_network(t.seed, t.depth, t.channels);
}

std::string RunReport::to_json() const {
  nlohmann::ordered_json j;
  auto& timing = j["timings_ms"] = nlohmann::ordered_json::object();
  for (const auto& t : timings) timing[t.stage] = t.milliseconds;
  auto& pixels = j["mask_pixels"] = nlohmann::ordered_json::object();
  for (const auto& [label, count] : mask_pixels) pixels[std::to_string(label)] = count;
  j["regions"] = nlohmann::ordered_json::array();
  for (const auto& r : regions) {
    j["regions"].push_back({{"label", r.label},
                            {"pixels", r.pixels},
                            {"styled", r.styled},
                            {"cache_hit", r.cache_hit},
                            {"iterations", r.iterations},
                            {"initial_loss", r.initial_loss},
                            {"final_loss", r.final_loss},
                            {"stop", r.stop}});
  }
  j["outputs"] = nlohmann::ordered_json::array();
  for (const auto& p : outputs) j["outputs"].push_back(p.string());
  j["image_sha256"] = image_sha256;
  j["config"] = config_echo;
  return j.dump(2);
}

namespace {

/// Files and directories created by this run, removed on failure.
class OutputLedger {
 public:
  ~OutputLedger() {
    if (committed_) return;
    std::error_code ec;
    for (auto it = files_.rbegin(); it != files_.rend(); ++it) fs::remove(*it, ec);
    for (auto it = dirs_.rbegin(); it != dirs_.rend(); ++it) fs::remove(*it, ec);
  }

  void make_dir(const fs::path& dir) {
    std::vector<fs::path> fresh;
    for (fs::path p = dir; !p.empty() && !fs::exists(p); p = p.parent_path()) {
      fresh.push_back(p);
      if (p == p.parent_path()) break;
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
    dirs_.insert(dirs_.end(), fresh.rbegin(), fresh.rend());
  }

  template <typename Writer>
  void write(const fs::path& path, Writer&& writer) {
    if (!path.parent_path().empty() && !fs::is_directory(path.parent_path())) {
      throw IoError("output directory does not exist: " + path.parent_path().string());
    }
    files_.push_back(path);
    writer(path);
    written_.push_back(path);
  }

  const std::vector<fs::path>& written() const { return written_; }
  void commit() { committed_ = true; }

 private:
  std::vector<fs::path> files_;
  std::vector<fs::path> dirs_;
  std::vector<fs::path> written_;
  bool committed_ = false;
};

template <typename F>
void run_stage(const char* name, RunReport& report, F&& body) {
  const auto start = std::chrono::steady_clock::now();
  try {
    body();
  } catch (const PipelineError&) {
    throw;
  } catch (const Error& e) {
    throw PipelineError(name, e.kind(), e.what());
  } catch (const fs::filesystem_error& e) {
    throw PipelineError(name, ErrorKind::Io, e.what());
  } catch (const std::bad_alloc&) {
    throw PipelineError(name, ErrorKind::Numerical, "out of memory");
  }
  const std::chrono::duration<double, std::milli> elapsed = std::chrono::steady_clock::now() - start;
  report.timings.push_back({name, elapsed.count()});
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

RunReport run_pipeline(const PipelineConfig& cfg, const RunOptions& options) {
  RunReport report;
  report.config_echo = emit_config(cfg);
  const fs::path out_base = options.out_dir ? *options.out_dir : cfg.base_dir;
  auto input = [&](const std::string& p) { return resolve(cfg.base_dir, p); };
  auto output = [&](const std::string& p) { return resolve(out_base, p); };

  OutputLedger ledger;
  ImageTensor content;
  NetworkSpec net;
  LabelMap labels;
  std::vector<Mask> masks;

  run_stage("load", report, [&] { content = load_image(input(cfg.content)); });

  run_stage("network", report, [&] {
    net = build_network(cfg.network, cfg.base_dir);
    if (net.input_channels != content.channels()) {
      throw ShapeError("network takes " + std::to_string(net.input_channels) + " channels, content image has " +
                       std::to_string(content.channels()));
    }
  });

  run_stage("segment", report, [&] {
    const std::size_t h = content.height();
    const std::size_t w = content.width();
    if (const auto* mask_file = std::get_if<MaskFile>(&cfg.segmentation)) {
      const Mask mask = load_mask(input(mask_file->path));
      if (mask.height != h || mask.width != w) throw ShapeError("segmentation mask does not match the content image");
      labels = LabelMap{h, w, 2, std::vector<std::uint32_t>(h * w)};
      for (std::size_t i = 0; i < h * w; ++i) labels.labels[i] = mask.values[i] >= 0.5 ? 1u : 0u;
    } else {
      UnaryField unary;
      if (const auto* file = std::get_if<UnaryFile>(&cfg.segmentation)) {
        unary = load_unary(read_file(input(file->path)));
        if (unary.height != h || unary.width != w) throw ShapeError("unary field does not match the content image");
      } else {
        const auto& seeds = std::get<SeedLists>(cfg.segmentation);
        unary = color_model_unary(content, seeds.fg, seeds.bg);
      }
      labels = run_crf(unary, content, cfg.crf, cfg.crf_iterations).labels;
    }
    masks = extract_region_masks(labels);
    for (std::size_t l = 0; l < masks.size(); ++l) report.mask_pixels[static_cast<std::uint32_t>(l)] = masks[l].count_members();
    for (const auto& [label, style] : cfg.styles) {
      if (label >= masks.size()) {
        throw ConfigError(ConfigErrc::InvalidValue, "style." + std::to_string(label) + " names a label beyond the " +
                                                        std::to_string(masks.size()) + " segmentation labels");
      }
    }
    if (cfg.out_masks) {
      const fs::path dir = output(*cfg.out_masks);
      ledger.make_dir(dir);
      for (std::size_t l = 0; l < masks.size(); ++l) {
        ledger.write(dir / ("mask_" + std::to_string(l) + ".pgm"),
                     [&](const fs::path& p) { save_mask(masks[l], p); });
      }
    }
  });

  if (options.segment_only) {
    ledger.commit();
    report.outputs = ledger.written();
    return report;
  }

  RegionStyleMap map;
  SynthesisConfig synth = cfg.synth;
  if (options.seed) synth.rng_seed = *options.seed;

  run_stage("descriptor", report, [&] {
    const fs::path cache_dir = options.cache_dir ? *options.cache_dir : default_cache_dir();
    const auto layers = synth.resolved_layers(net);
    const auto weights = synth.resolved_weights(net);
    for (std::size_t l = 0; l < masks.size(); ++l) {
      if (report.mask_pixels[static_cast<std::uint32_t>(l)] == 0) continue;
      RegionReport region;
      region.label = static_cast<std::uint32_t>(l);
      region.pixels = report.mask_pixels[region.label];
      auto style_it = cfg.styles.find(region.label);
      if (style_it == cfg.styles.end()) {
        map.entries.push_back({masks[l], KeepContent{}, std::nullopt});
      } else {
        ImageTensor style = load_image(input(style_it->second.image));
        if (style_it->second.mask) {
          const Mask style_mask = load_mask(input(*style_it->second.mask));
          if (style_mask.height != style.height() || style_mask.width != style.width()) {
            throw ShapeError("style_mask." + std::to_string(l) + " does not match its style image");
          }
          const auto box = mask_bounding_box(style_mask);
          if (!box) throw ShapeError("style_mask." + std::to_string(l) + " selects no pixels");
          style = crop(style, box->y0, box->x0, box->height, box->width);
        }
        CachedDescriptor cached = cache_descriptor(style, net, layers, weights, synth.channel_mean, cache_dir);
        region.styled = true;
        region.cache_hit = cached.hit;
        map.entries.push_back({masks[l], std::move(cached.descriptor), std::nullopt});
      }
      report.regions.push_back(region);
    }
  });

  RegionSynthesis result;
  run_stage("synthesize", report, [&] {
    result = per_region_synthesize(content, map, net, synth, cfg.feather, options.execution);
    for (std::size_t r = 0; r < result.regions.size(); ++r) {
      const auto& outcome = result.regions[r];
      auto& region = report.regions[r];
      region.iterations = outcome.trace.size();
      region.initial_loss = outcome.trace.empty() ? 0.0 : outcome.trace.records.front().total;
      region.final_loss = outcome.final_loss;
      region.stop = region.styled ? stop_reason_name(outcome.stop) : "unstyled";
    }
    if (!result.image.all_finite()) throw NumericalError("synthesized image contains non-finite values");
  });

  run_stage("write", report, [&] {
    const fs::path image_path = output(cfg.out_image);
    ledger.write(image_path, [&](const fs::path& p) { save_image(result.image, p); });
    report.image_sha256 = sha256_hex(read_file(image_path));
    if (cfg.out_masks) {
      const fs::path dir = output(*cfg.out_masks);
      for (std::size_t r = 0; r < result.regions.size(); ++r) {
        ledger.write(dir / ("region_" + std::to_string(report.regions[r].label) + ".ppm"),
                     [&](const fs::path& p) { save_image(result.regions[r].image, p); });
      }
    }
    if (cfg.out_trace) {
      const fs::path dir = output(*cfg.out_trace);
      ledger.make_dir(dir);
      for (std::size_t r = 0; r < result.regions.size(); ++r) {
        if (!report.regions[r].styled) continue;
        ledger.write(dir / ("trace_" + std::to_string(report.regions[r].label) + ".csv"), [&](const fs::path& p) {
          std::ofstream out(p, std::ios::binary | std::ios::trunc);
          if (!out) throw IoError("cannot create " + p.string());
          result.regions[r].trace.write_csv(out);
          if (!out) throw IoError("write failed: " + p.string());
        });
      }
    }
  });

  ledger.commit();
  report.outputs = ledger.written();
  return report;
}

}  // namespace texturesmith
