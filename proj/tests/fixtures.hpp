#pragma once
// Seeded fixtures shared by the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "texturesmith/image_io.hpp"
#include "texturesmith/net.hpp"
#include "texturesmith/random.hpp"
#include "texturesmith/segment.hpp"
#include "texturesmith/synth.hpp"
#include "texturesmith/tensor.hpp"

namespace fixture {

namespace ts = texturesmith;
namespace fs = std::filesystem;

inline ts::ImageTensor random_image(std::uint64_t seed, ts::Shape shape, double lo = 0.0, double hi = 1.0) {
  ts::SeededUniform rng(seed);
  ts::ImageTensor t(shape);
  for (auto& v : t.values()) v = static_cast<float>(rng.next(lo, hi));
  return t;
}

/// Values that survive an 8-bit round trip.
inline ts::ImageTensor random_8bit_image(std::uint64_t seed, ts::Shape shape) {
  ts::SeededUniform rng(seed);
  ts::ImageTensor t(shape);
  for (auto& v : t.values()) v = static_cast<float>(static_cast<int>(rng.next() * 256.0) % 256) / 255.0f;
  return t;
}

/// Smooth colour ramp with a soft blob: a content image with structure at
/// several scales.
inline ts::ImageTensor ramp_content(std::size_t h, std::size_t w) {
  ts::ImageTensor t(3, h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double u = static_cast<double>(x) / static_cast<double>(w - 1);
      const double v = static_cast<double>(y) / static_cast<double>(h - 1);
      const double blob = std::exp(-((u - 0.6) * (u - 0.6) + (v - 0.4) * (v - 0.4)) / 0.05);
      t.at(0, y, x) = static_cast<float>(0.2 + 0.6 * u);
      t.at(1, y, x) = static_cast<float>(0.3 + 0.4 * v * (1.0 - blob));
      t.at(2, y, x) = static_cast<float>(0.1 + 0.8 * blob);
    }
  }
  return t;
}

/// Diagonal stripes plus seeded grain, period `period` pixels.
inline ts::ImageTensor stripe_style(std::uint64_t seed, std::size_t h, std::size_t w, double period,
                                    const float (&a)[3], const float (&b)[3]) {
  ts::SeededUniform rng(seed);
  ts::ImageTensor t(3, h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double s = 0.5 + 0.5 * std::sin(2.0 * M_PI * static_cast<double>(x + y) / period);
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = a[c] * s + b[c] * (1.0 - s) + rng.next(-0.05, 0.05);
        t.at(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return t;
}

/// 3x16x16 descent fixture: seeded test network, ramp content, striped style.
struct DescentFixture {
  ts::NetworkSpec net = ts::seeded_test_network(11, 3, 8);
  ts::ImageTensor content = ramp_content(16, 16);
  ts::ImageTensor style = stripe_style(12, 16, 16, 5.0, {0.9f, 0.8f, 0.1f}, {0.1f, 0.2f, 0.6f});
  ts::SynthesisConfig cfg = [] {
    ts::SynthesisConfig c;
    c.max_iterations = 200;
    c.convergence_tol = 0.0;
    return c;
  }();
};

/// 32x32 two-colour disk with grain, and a unary whose labels are flipped at
/// 10% of the pixels.
struct NoisyDisk {
  static constexpr std::size_t kSize = 32;
  ts::ImageTensor image;
  ts::UnaryField unary;
  std::vector<std::uint32_t> truth;
  ts::PairwiseParams params{3.0, 8.0, 0.1, 1.0, 3.0};
  std::size_t flipped = 0;

  explicit NoisyDisk(std::uint64_t seed = 2024) {
    ts::SeededUniform rng(seed);
    image = ts::ImageTensor(3, kSize, kSize);
    unary = ts::UnaryField{kSize, kSize, 2, std::vector<float>(kSize * kSize * 2)};
    truth.resize(kSize * kSize);
    const float fg[3] = {0.85f, 0.35f, 0.2f};
    const float bg[3] = {0.2f, 0.45f, 0.75f};
    for (std::size_t y = 0; y < kSize; ++y) {
      for (std::size_t x = 0; x < kSize; ++x) {
        const double dy = static_cast<double>(y) - 15.5, dx = static_cast<double>(x) - 15.5;
        const std::uint32_t label = dy * dy + dx * dx <= 10.0 * 10.0 ? 1u : 0u;
        const std::size_t p = y * kSize + x;
        truth[p] = label;
        for (std::size_t c = 0; c < 3; ++c) {
          image.at(c, y, x) = static_cast<float>((label ? fg[c] : bg[c]) + rng.next(-0.03, 0.03));
        }
        std::uint32_t observed = label;
        if (rng.next() < 0.10) {
          observed = 1u - label;
          ++flipped;
        }
        unary.at(p, observed) = static_cast<float>(-std::log(0.7));
        unary.at(p, 1u - observed) = static_cast<float>(-std::log(0.3));
      }
    }
  }
};

/// SHA-256 of the output image produced by write_golden_fixture.
inline constexpr const char* kGoldenSha256 = "af7cd59b3f0fbec1e009b7141e630d85ebfb7bf97703d9cf25c4d7bb7678d8b3";

/// Fresh, empty directory under the system temp directory.
inline fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("texturesmith_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

/// Two-region pipeline fixture: 3x32x32 disk content, two seeded styles,
/// colour-model segmentation through the CRF, seeded test network (seed 7,
/// depth 3, 8 channels). Writes inputs and config into `dir`.
inline fs::path write_golden_fixture(const fs::path& dir) {
  ts::ImageTensor content(3, 32, 32);
  ts::SeededUniform rng(77);
  for (std::size_t y = 0; y < 32; ++y) {
    for (std::size_t x = 0; x < 32; ++x) {
      const double dy = static_cast<double>(y) - 14.0, dx = static_cast<double>(x) - 17.0;
      const bool inside = dy * dy + dx * dx <= 9.0 * 9.0;
      const double shade = 0.1 * static_cast<double>(x) / 31.0;
      const double base[3] = {inside ? 0.8 : 0.25, inside ? 0.4 : 0.5, inside ? 0.2 : 0.7};
      for (std::size_t c = 0; c < 3; ++c) {
        content.at(c, y, x) = static_cast<float>(std::clamp(base[c] + shade + rng.next(-0.02, 0.02), 0.0, 1.0));
      }
    }
  }
  const auto style_fg = stripe_style(71, 32, 32, 6.0, {0.95f, 0.85f, 0.2f}, {0.6f, 0.1f, 0.1f});
  const auto style_bg = stripe_style(72, 32, 32, 3.0, {0.1f, 0.3f, 0.2f}, {0.5f, 0.8f, 0.9f});
  ts::save_image(content, dir / "content.ppm");
  ts::save_image(style_fg, dir / "style_fg.ppm");
  ts::save_image(style_bg, dir / "style_bg.ppm");

  const fs::path cfg = dir / "pipeline.cfg";
  std::ofstream out(cfg);
  out << "# two-region golden fixture\n"
         "content = content.ppm\n"
         "style.fg = style_fg.ppm\n"
         "style.bg = style_bg.ppm\n"
         "test_net.seed = 7\n"
         "test_net.depth = 3\n"
         "test_net.channels = 8\n"
         "seeds.fg = 14,17; 10,15; 18,20\n"
         "seeds.bg = 2,2; 29,29; 2,29; 29,2\n"
         "crf.iters = 5\n"
         "synth.max_iters = 60\n"
         "synth.tol = 0\n"
         "feather.radius = 2\n"
         "out.image = out/result.ppm\n"
         "out.masks = out/masks\n"
         "out.trace = out/trace\n";
  fs::create_directories(dir / "out");
  return cfg;
}

}  // namespace fixture
