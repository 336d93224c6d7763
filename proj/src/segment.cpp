#include "texturesmith/segment.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bytes.hpp"
#include "texturesmith/error.hpp"

namespace texturesmith {

void UnaryField::validate() const {
  if (n_labels < 2) throw ShapeError("unary field needs at least 2 labels");
  if (values.size() != height * width * n_labels) {
    throw ShapeError("unary field " + std::to_string(height) + "x" + std::to_string(width) + "x" +
                     std::to_string(n_labels) + " has " + std::to_string(values.size()) + " values");
  }
  for (float v : values) {
    if (!std::isfinite(v)) throw ShapeError("unary field contains a non-finite energy");
  }
}

void PairwiseParams::validate() const {
  if (!(w_appearance >= 0.0) || !(w_smooth >= 0.0)) {
    throw ConfigError(ConfigErrc::InvalidValue, "pairwise kernel weights must be >= 0");
  }
  if (!(theta_alpha > 0.0) || !(theta_beta > 0.0) || !(theta_gamma > 0.0)) {
    throw ConfigError(ConfigErrc::InvalidValue, "pairwise kernel widths must be > 0");
  }
}

std::size_t Mask::count_members() const noexcept {
  return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](double v) { return v >= 0.5; }));
}

UnaryField color_model_unary(const ImageTensor& image, std::span<const Pixel> fg_seeds,
                             std::span<const Pixel> bg_seeds, double sigma) {
  if (fg_seeds.empty() || bg_seeds.empty()) throw ConfigError(ConfigErrc::MissingKey, "colour model needs fg and bg seeds");
  if (!(sigma > 0.0)) throw ConfigError(ConfigErrc::InvalidValue, "colour model sigma must be > 0");
  const std::size_t channels = image.channels();

  auto mean_colour = [&](std::span<const Pixel> seeds, const char* which) {
    std::vector<double> mean(channels, 0.0);
    for (const Pixel& p : seeds) {
      if (p.row >= image.height() || p.col >= image.width()) {
        throw ConfigError(ConfigErrc::InvalidValue, std::string(which) + " seed (" + std::to_string(p.row) + "," +
                                                        std::to_string(p.col) + ") outside the " +
                                                        image.shape().str() + " image");
      }
      for (std::size_t c = 0; c < channels; ++c) mean[c] += image.at(c, p.row, p.col);
    }
    for (double& m : mean) m /= static_cast<double>(seeds.size());
    return mean;
  };
  const std::vector<double> means[2] = {mean_colour(bg_seeds, "background"), mean_colour(fg_seeds, "foreground")};

  UnaryField unary{image.height(), image.width(), 2, std::vector<float>(image.height() * image.width() * 2)};
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t y = 0; y < image.height(); ++y) {
    for (std::size_t x = 0; x < image.width(); ++x) {
      for (std::size_t l = 0; l < 2; ++l) {
        double d2 = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
          const double d = image.at(c, y, x) - means[l][c];
          d2 += d * d;
        }
        unary.at(y * image.width() + x, l) = static_cast<float>(d2 * inv);
      }
    }
  }
  return unary;
}

namespace {
constexpr std::string_view kUnaryMagic = "UNRY";
constexpr std::uint32_t kUnaryVersion = 1;
}  // namespace

std::vector<std::uint8_t> serialize_unary(const UnaryField& unary) {
  unary.validate();
  detail::ByteWriter out;
  out.magic(kUnaryMagic);
  out.u32(kUnaryVersion);
  out.u32(static_cast<std::uint32_t>(unary.height));
  out.u32(static_cast<std::uint32_t>(unary.width));
  out.u32(static_cast<std::uint32_t>(unary.n_labels));
  out.f32s(unary.values);
  return out.take();
}

UnaryField load_unary(std::span<const std::uint8_t> bytes) {
  detail::ByteReader in(bytes, "unary");
  in.expect_magic(kUnaryMagic);
  const std::uint32_t version = in.u32();
  if (version != kUnaryVersion) {
    throw FormatError(FormatErrc::UnsupportedVersion, "unary: unsupported version " + std::to_string(version));
  }
  UnaryField unary;
  unary.height = in.u32();
  unary.width = in.u32();
  unary.n_labels = in.u32();
  if (unary.n_labels < 2) throw FormatError(FormatErrc::InvalidValue, "unary: needs at least 2 labels");
  unary.values = in.f32s(static_cast<std::uint64_t>(unary.height) * unary.width * unary.n_labels);
  in.expect_end();
  for (float v : unary.values) {
    if (!std::isfinite(v)) throw FormatError(FormatErrc::InvalidValue, "unary: non-finite energy");
  }
  return unary;
}

namespace {

// Normalized exp(-energy) for one pixel.
void softmax_neg(std::span<const double> energy, std::span<double> out) {
  const double lo = *std::min_element(energy.begin(), energy.end());
  double sum = 0.0;
  for (std::size_t l = 0; l < energy.size(); ++l) {
    out[l] = std::exp(lo - energy[l]);
    sum += out[l];
  }
  for (double& v : out) v /= sum;
}

}  // namespace

MarginalField meanfield_init(const UnaryField& unary) {
  unary.validate();
  MarginalField q{unary.height, unary.width, unary.n_labels, std::vector<double>(unary.values.size())};
  std::vector<double> energy(unary.n_labels);
  for (std::size_t i = 0; i < unary.pixels(); ++i) {
    for (std::size_t l = 0; l < unary.n_labels; ++l) energy[l] = unary.at(i, l);
    softmax_neg(energy, std::span<double>(q.values).subspan(i * unary.n_labels, unary.n_labels));
  }
  return q;
}

MarginalField meanfield_step(const MarginalField& q, const UnaryField& unary, const ImageTensor& image,
                             const PairwiseParams& params) {
  params.validate();
  unary.validate();
  const std::size_t h = unary.height;
  const std::size_t w = unary.width;
  const std::size_t n_labels = unary.n_labels;
  if (q.height != h || q.width != w || q.n_labels != n_labels || q.values.size() != unary.values.size()) {
    throw ShapeError("marginals do not match the unary field");
  }
  if (image.height() != h || image.width() != w) {
    throw ShapeError("image " + image.shape().str() + " does not match the " + std::to_string(h) + "x" +
                     std::to_string(w) + " unary field");
  }

  // Spatial factors depend only on the pixel offset.
  const std::size_t span_w = 2 * w - 1;
  std::vector<double> spatial_app((2 * h - 1) * span_w);
  std::vector<double> spatial_smooth(spatial_app.size());
  const double inv_alpha = 1.0 / (2.0 * params.theta_alpha * params.theta_alpha);
  const double inv_gamma = 1.0 / (2.0 * params.theta_gamma * params.theta_gamma);
  const double inv_beta = 1.0 / (2.0 * params.theta_beta * params.theta_beta);
  for (std::size_t oy = 0; oy < 2 * h - 1; ++oy) {
    for (std::size_t ox = 0; ox < span_w; ++ox) {
      const double dy = static_cast<double>(oy) - static_cast<double>(h - 1);
      const double dx = static_cast<double>(ox) - static_cast<double>(w - 1);
      const double d2 = dy * dy + dx * dx;
      spatial_app[oy * span_w + ox] = params.w_appearance * std::exp(-d2 * inv_alpha);
      spatial_smooth[oy * span_w + ox] = params.w_smooth * std::exp(-d2 * inv_gamma);
    }
  }

  const std::size_t channels = image.channels();
  const std::size_t n = h * w;
  std::vector<double> colours(n * channels);
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t p = 0; p < n; ++p) colours[p * channels + c] = image.values()[c * n + p];

  const bool pairwise = params.w_appearance != 0.0 || params.w_smooth != 0.0;
  MarginalField next{h, w, n_labels, std::vector<double>(q.values.size())};
  std::vector<double> filtered(n_labels);
  std::vector<double> energy(n_labels);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(filtered.begin(), filtered.end(), 0.0);
    if (pairwise) {
      const std::size_t yi = i / w;
      const std::size_t xi = i % w;
      const double* ci = colours.data() + i * channels;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const std::size_t yj = j / w;
        const std::size_t xj = j % w;
        const std::size_t off = (yj + h - 1 - yi) * span_w + (xj + w - 1 - xi);
        double kernel = spatial_smooth[off];
        if (params.w_appearance != 0.0) {
          const double* cj = colours.data() + j * channels;
          double c2 = 0.0;
          for (std::size_t c = 0; c < channels; ++c) {
            const double d = ci[c] - cj[c];
            c2 += d * d;
          }
          kernel += spatial_app[off] * std::exp(-c2 * inv_beta);
        }
        const double* qj = q.values.data() + j * n_labels;
        for (std::size_t l = 0; l < n_labels; ++l) filtered[l] += kernel * qj[l];
      }
    }
    // Potts compatibility: every other label contributes, its own does not.
    double total = 0.0;
    for (double f : filtered) total += f;
    for (std::size_t l = 0; l < n_labels; ++l) energy[l] = unary.at(i, l) + (total - filtered[l]);
    softmax_neg(energy, std::span<double>(next.values).subspan(i * n_labels, n_labels));
  }
  return next;
}

LabelMap argmax_labels(const MarginalField& q) {
  LabelMap labels{q.height, q.width, q.n_labels, std::vector<std::uint32_t>(q.pixels())};
  for (std::size_t i = 0; i < q.pixels(); ++i) {
    std::size_t best = 0;
    for (std::size_t l = 1; l < q.n_labels; ++l) {
      if (q.at(i, l) > q.at(i, best)) best = l;
    }
    labels.labels[i] = static_cast<std::uint32_t>(best);
  }
  return labels;
}

std::vector<Mask> extract_region_masks(const LabelMap& labels) {
  std::vector<Mask> masks(labels.n_labels, Mask(labels.height, labels.width));
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    const std::uint32_t l = labels.labels[i];
    if (l >= labels.n_labels) throw ShapeError("label " + std::to_string(l) + " out of range");
    masks[l].values[i] = 1.0;
  }
  return masks;
}

CrfResult run_crf(const UnaryField& unary, const ImageTensor& image, const PairwiseParams& params,
                  std::size_t iterations) {
  CrfResult result;
  result.marginals = meanfield_init(unary);
  for (std::size_t it = 0; it < iterations; ++it) {
    result.marginals = meanfield_step(result.marginals, unary, image, params);
  }
  result.labels = argmax_labels(result.marginals);
  result.masks = extract_region_masks(result.labels);
  return result;
}

}  // namespace texturesmith
