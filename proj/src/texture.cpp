#include "texturesmith/texture.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bytes.hpp"
#include "texturesmith/error.hpp"

namespace texturesmith {

void GramSet::validate() const {
  for (std::size_t e = 0; e < entries.size(); ++e) {
    const auto& entry = entries[e];
    if (e > 0 && entry.layer_index <= entries[e - 1].layer_index) {
      throw ShapeError("descriptor layer indices must be strictly increasing");
    }
    if (!(entry.weight >= 0.0f) || !std::isfinite(entry.weight)) {
      throw ShapeError("descriptor layer weight must be finite and >= 0");
    }
    if (entry.gram.n != entry.n_filters || entry.gram.values.size() != entry.n_filters * entry.n_filters) {
      throw ShapeError("descriptor entry for layer " + std::to_string(entry.layer_index) + " has inconsistent size");
    }
  }
}

std::vector<std::size_t> GramSet::layers() const {
  std::vector<std::size_t> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.layer_index);
  return out;
}

FeatureMatrix flatten_features(const ImageTensor& activation) {
  auto v = activation.values();
  return {activation.channels(), activation.height() * activation.width(), std::vector<float>(v.begin(), v.end())};
}

ImageTensor unflatten_features(const FeatureMatrix& features, std::size_t height, std::size_t width) {
  if (height * width != features.n_positions) {
    throw ShapeError("cannot unflatten " + std::to_string(features.n_positions) + " positions into " +
                     std::to_string(height) + "x" + std::to_string(width));
  }
  return ImageTensor(Shape{features.n_filters, height, width}, features.values);
}

GramMatrix gram(const FeatureMatrix& f) {
  const std::size_t n = f.n_filters;
  const std::size_t m = f.n_positions;
  GramMatrix g{n, std::vector<float>(n * n, 0.0f)};
  for (std::size_t i = 0; i < n; ++i) {
    const float* fi = f.values.data() + i * m;
    for (std::size_t j = i; j < n; ++j) {
      const float* fj = f.values.data() + j * m;
      double acc = 0.0;
      for (std::size_t k = 0; k < m; ++k) acc += static_cast<double>(fi[k]) * fj[k];
      g.values[i * n + j] = g.values[j * n + i] = static_cast<float>(acc);
    }
  }
  return g;
}

double layer_loss(const GramMatrix& g, const GramMatrix& q, std::size_t n, std::size_t m) {
  if (g.n != q.n || g.n != n || g.values.size() != n * n || q.values.size() != n * n) {
    throw ShapeError("layer loss: Gram sizes " + std::to_string(g.n) + " and " + std::to_string(q.n) +
                     " do not match N=" + std::to_string(n));
  }
  if (n == 0 || m == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    const double d = static_cast<double>(g.values[i]) - static_cast<double>(q.values[i]);
    acc += d * d;
  }
  const double nm = static_cast<double>(n) * static_cast<double>(m);
  return acc / (4.0 * nm * nm);
}

double total_loss(std::span<const double> layer_losses, std::span<const double> weights) {
  if (layer_losses.size() != weights.size()) {
    throw ShapeError("total loss: " + std::to_string(layer_losses.size()) + " layer losses but " +
                     std::to_string(weights.size()) + " weights");
  }
  double acc = 0.0;
  for (std::size_t l = 0; l < weights.size(); ++l) acc += weights[l] * layer_losses[l];
  return acc;
}

FeatureMatrix layer_loss_gradient(const FeatureMatrix& f, const GramMatrix& g, const GramMatrix& q) {
  const std::size_t n = f.n_filters;
  const std::size_t m = f.n_positions;
  if (g.n != n || q.n != n || f.values.size() != n * m) {
    throw ShapeError("layer loss gradient: features " + std::to_string(n) + "x" + std::to_string(m) +
                     " do not match Gram sizes " + std::to_string(g.n) + ", " + std::to_string(q.n));
  }
  FeatureMatrix grad{n, m, std::vector<float>(n * m, 0.0f)};
  if (n == 0 || m == 0) return grad;
  const double nm = static_cast<double>(n) * static_cast<double>(m);
  const double scale = 1.0 / (nm * nm);

  std::vector<double> diff(n * n);
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = static_cast<double>(g.values[i]) - q.values[i];

  std::vector<double> row(m);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(row.begin(), row.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const double d = diff[i * n + j];
      if (d == 0.0) continue;
      const float* fj = f.values.data() + j * m;
      for (std::size_t k = 0; k < m; ++k) row[k] += d * fj[k];
    }
    for (std::size_t k = 0; k < m; ++k) grad.values[i * m + k] = static_cast<float>(scale * row[k]);
  }
  return grad;
}

std::vector<float> uniform_layer_weights(std::size_t count) {
  if (count == 0) return {};
  return std::vector<float>(count, 1.0f / static_cast<float>(count));
}

ImageTensor preprocess(const ImageTensor& image, std::span<const float> channel_mean) {
  if (channel_mean.empty()) return image;
  if (channel_mean.size() != image.channels()) {
    throw ShapeError("channel mean has " + std::to_string(channel_mean.size()) + " entries for a " +
                     std::to_string(image.channels()) + "-channel image");
  }
  ImageTensor out = image;
  for (std::size_t c = 0; c < out.channels(); ++c)
    for (float& v : out.channel(c)) v -= channel_mean[c];
  return out;
}

GramSet style_descriptor(const NetworkSpec& net, const ImageTensor& image, std::span<const std::size_t> layers,
                         std::span<const float> weights, std::span<const float> channel_mean) {
  if (layers.size() != weights.size()) {
    throw ShapeError("descriptor: " + std::to_string(layers.size()) + " layers but " + std::to_string(weights.size()) +
                     " weights");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l] >= net.layers.size()) {
      throw ShapeError("descriptor layer " + std::to_string(layers[l]) + " out of range for a " +
                       std::to_string(net.layers.size()) + "-layer network");
    }
  }
  const ActivationTrace trace = network_forward(net, preprocess(image, channel_mean));
  GramSet set;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const FeatureMatrix f = flatten_features(trace.outputs[layers[l]]);
    set.entries.push_back({layers[l], weights[l], f.n_filters, f.n_positions, gram(f)});
  }
  set.validate();
  return set;
}

namespace {
constexpr std::string_view kGramMagic = "TXSG";
}

std::vector<std::uint8_t> serialize_gram_set(const GramSet& set) {
  set.validate();
  detail::ByteWriter out;
  out.magic(kGramMagic);
  out.u32(static_cast<std::uint32_t>(set.entries.size()));
  for (const auto& e : set.entries) {
    out.u32(static_cast<std::uint32_t>(e.layer_index));
    out.f32(e.weight);
    out.u32(static_cast<std::uint32_t>(e.n_filters));
    out.u32(static_cast<std::uint32_t>(e.n_positions));
    out.f32s(e.gram.values);
  }
  return out.take();
}

GramSet load_gram_set(std::span<const std::uint8_t> bytes) {
  detail::ByteReader in(bytes, "descriptor");
  in.expect_magic(kGramMagic);
  const std::uint32_t count = in.u32();
  if (count > in.remaining() / 16) {
    throw FormatError(FormatErrc::Truncated, "descriptor: declares " + std::to_string(count) + " entries, stream too short");
  }
  GramSet set;
  for (std::uint32_t e = 0; e < count; ++e) {
    GramEntry entry;
    entry.layer_index = in.u32();
    entry.weight = in.f32();
    entry.n_filters = in.u32();
    entry.n_positions = in.u32();
    entry.gram.n = entry.n_filters;
    entry.gram.values = in.f32s(static_cast<std::uint64_t>(entry.n_filters) * entry.n_filters);
    set.entries.push_back(std::move(entry));
  }
  in.expect_end();
  try {
    set.validate();
  } catch (const ShapeError& err) {
    throw FormatError(FormatErrc::InvalidValue, std::string("descriptor: ") + err.what());
  }
  return set;
}

}  // namespace texturesmith
