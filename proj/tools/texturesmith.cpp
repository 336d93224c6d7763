// texturesmith: segment a content image and give each region its own
// Gram-matched texture.
//
//   texturesmith run --config <path> [--out-dir <path>] [--seed <u64>] [--verbose]
//   texturesmith segment --config <path>
//   texturesmith gram --style <img> --weights <file> --layers <csv> --out <file>
//
// Exit codes: 0 success, 1 config error, 2 I/O error, 3 numerical failure.

#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "texturesmith/config.hpp"
#include "texturesmith/error.hpp"
#include "texturesmith/image_io.hpp"
#include "texturesmith/net.hpp"
#include "texturesmith/pipeline.hpp"
#include "texturesmith/texture.hpp"

namespace ts = texturesmith;

namespace {

enum ExitCode { kOk = 0, kConfig = 1, kIo = 2, kNumerical = 3 };

int exit_code_for(ts::ErrorKind kind) {
  switch (kind) {
    case ts::ErrorKind::Config:
    case ts::ErrorKind::Shape:
      return kConfig;
    case ts::ErrorKind::Format:
    case ts::ErrorKind::Io:
      return kIo;
    case ts::ErrorKind::Numerical:
      return kNumerical;
  }
  return kConfig;
}

std::vector<std::size_t> parse_layers(const std::string& csv) {
  std::vector<std::size_t> layers;
  std::stringstream in(csv);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      const unsigned long v = std::stoul(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      layers.push_back(v);
    } catch (const std::exception&) {
      throw ts::ConfigError(ts::ConfigErrc::TypeMismatch, "--layers: not a layer index: \"" + item + "\"");
    }
  }
  return layers;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Region-aware Gram-matrix texture synthesis"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool verbose = false;
  auto* run = app.add_subcommand("run", "segment, match styles per region and composite");
  run->add_option("--config", config_path, "pipeline config file")->required();
  auto* out_dir_opt = run->add_option("--out-dir", out_dir, "base directory for relative output paths");
  auto* seed_opt = run->add_option("--seed", seed, "synthesis random seed");
  run->add_flag("--verbose", verbose, "print the run report as JSON");

  auto* segment = app.add_subcommand("segment", "write the segmentation masks only");
  segment->add_option("--config", config_path, "pipeline config file")->required();

  std::string style_path, weights_path, layers_csv, out_path;
  auto* gram = app.add_subcommand("gram", "compute and store a style descriptor");
  gram->add_option("--style", style_path, "style image")->required();
  gram->add_option("--weights", weights_path, "network weights file")->required();
  gram->add_option("--layers", layers_csv, "comma-separated texture layer indices (default: network default)");
  gram->add_option("--out", out_path, "descriptor output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*gram) {
      const ts::NetworkSpec net = ts::load_weights(ts::read_file(weights_path));
      const auto layers = layers_csv.empty() ? ts::default_style_layers(net) : parse_layers(layers_csv);
      const auto weights = ts::uniform_layer_weights(layers.size());
      const ts::GramSet set = ts::style_descriptor(net, ts::load_image(style_path), layers, weights);
      ts::write_file(out_path, ts::serialize_gram_set(set));
      return kOk;
    }

    ts::PipelineConfig cfg = ts::load_config(config_path);
    ts::RunOptions options;
    if (*segment) options.segment_only = true;
    if (*out_dir_opt) options.out_dir = out_dir;
    if (*seed_opt) options.seed = seed;
    const ts::RunReport report = ts::run_pipeline(cfg, options);
    if (verbose) std::cout << report.to_json() << '\n';
    return kOk;
  } catch (const ts::Error& e) {
    std::cerr << "texturesmith: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "texturesmith: " << e.what() << '\n';
    return kIo;
  }
}
