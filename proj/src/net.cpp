#include "texturesmith/net.hpp"

#include <cmath>
#include <string>

#include "bytes.hpp"
#include "texturesmith/error.hpp"
#include "texturesmith/random.hpp"

namespace texturesmith {

namespace {

std::size_t sliding_extent(std::size_t size, std::size_t padding, std::size_t kernel, std::size_t stride,
                           const char* what) {
  if (size + 2 * padding < kernel) {
    throw ShapeError(std::string(what) + " window " + std::to_string(kernel) + " exceeds padded extent " +
                     std::to_string(size + 2 * padding));
  }
  return (size + 2 * padding - kernel) / stride + 1;
}

void require_same_shape(const ImageTensor& a, const ImageTensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape " + a.shape().str() + " does not match " + b.shape().str());
  }
}

}  // namespace

void ConvLayer::validate() const {
  if (out_channels == 0 || in_channels == 0 || kernel_h == 0 || kernel_w == 0) {
    throw ShapeError("conv layer has a zero dimension");
  }
  if (stride < 1) throw ShapeError("conv stride must be >= 1");
  if (weights.size() != out_channels * in_channels * kernel_h * kernel_w) {
    throw ShapeError("conv weights length " + std::to_string(weights.size()) + " != " +
                     std::to_string(out_channels * in_channels * kernel_h * kernel_w));
  }
  if (bias.size() != out_channels) {
    throw ShapeError("conv bias length " + std::to_string(bias.size()) + " != " + std::to_string(out_channels));
  }
}

Shape ConvLayer::output_shape(const Shape& input) const {
  if (input.channels != in_channels) {
    throw ShapeError("conv expects " + std::to_string(in_channels) + " input channels, got " +
                     std::to_string(input.channels));
  }
  if (stride < 1) throw ShapeError("conv stride must be >= 1");
  return {out_channels, sliding_extent(input.height, padding, kernel_h, stride, "conv"),
          sliding_extent(input.width, padding, kernel_w, stride, "conv")};
}

Shape AvgPoolLayer::output_shape(const Shape& input) const {
  if (window < 1 || stride < 1) throw ShapeError("pool window and stride must be >= 1");
  return {input.channels, sliding_extent(input.height, 0, window, stride, "pool"),
          sliding_extent(input.width, 0, window, stride, "pool")};
}

LayerKind kind_of(const LayerSpec& layer) noexcept { return static_cast<LayerKind>(layer.index()); }

const char* kind_name(LayerKind kind) noexcept {
  switch (kind) {
    case LayerKind::Conv:
      return "conv";
    case LayerKind::Relu:
      return "relu";
    case LayerKind::AvgPool:
      return "avgpool";
  }
  return "?";
}

std::vector<Shape> NetworkSpec::layer_shapes(const Shape& input) const {
  if (input.channels != input_channels) {
    throw ShapeError("network expects " + std::to_string(input_channels) + " input channels, got " +
                     std::to_string(input.channels));
  }
  std::vector<Shape> shapes;
  shapes.reserve(layers.size());
  Shape current = input;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    try {
      current = std::visit(
          [&](const auto& layer) -> Shape {
            using T = std::decay_t<decltype(layer)>;
            if constexpr (std::is_same_v<T, ConvLayer>) {
              layer.validate();
              return layer.output_shape(current);
            } else if constexpr (std::is_same_v<T, AvgPoolLayer>) {
              return layer.output_shape(current);
            } else {
              return current;
            }
          },
          layers[k]);
    } catch (const ShapeError& e) {
      throw ShapeError(e.what(), k);
    }
    shapes.push_back(current);
  }
  return shapes;
}

void NetworkSpec::validate() const {
  std::size_t channels = input_channels;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (const auto* conv = std::get_if<ConvLayer>(&layers[k])) {
      try {
        conv->validate();
      } catch (const ShapeError& e) {
        throw ShapeError(e.what(), k);
      }
      if (conv->in_channels != channels) {
        throw ShapeError("conv in_channels " + std::to_string(conv->in_channels) + " but previous layer yields " +
                             std::to_string(channels),
                         k);
      }
      channels = conv->out_channels;
    } else if (const auto* pool = std::get_if<AvgPoolLayer>(&layers[k])) {
      if (pool->window < 1 || pool->stride < 1) throw ShapeError("pool window and stride must be >= 1", k);
    }
  }
}

ImageTensor conv2d_forward(const ImageTensor& input, const ConvLayer& layer) {
  layer.validate();
  const Shape out_shape = layer.output_shape(input.shape());
  ImageTensor out(out_shape);
  const auto h = static_cast<std::ptrdiff_t>(input.height());
  const auto w = static_cast<std::ptrdiff_t>(input.width());
  const auto pad = static_cast<std::ptrdiff_t>(layer.padding);
  const auto stride = static_cast<std::ptrdiff_t>(layer.stride);

  for (std::size_t o = 0; o < out_shape.channels; ++o) {
    for (std::size_t oy = 0; oy < out_shape.height; ++oy) {
      for (std::size_t ox = 0; ox < out_shape.width; ++ox) {
        float acc = layer.bias[o];
        for (std::size_t i = 0; i < layer.in_channels; ++i) {
          for (std::size_t ky = 0; ky < layer.kernel_h; ++ky) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * stride + static_cast<std::ptrdiff_t>(ky) - pad;
            if (iy < 0 || iy >= h) continue;
            for (std::size_t kx = 0; kx < layer.kernel_w; ++kx) {
              const std::ptrdiff_t ix =
                  static_cast<std::ptrdiff_t>(ox) * stride + static_cast<std::ptrdiff_t>(kx) - pad;
              if (ix < 0 || ix >= w) continue;
              acc += layer.weight(o, i, ky, kx) * input.at(i, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
            }
          }
        }
        out.at(o, oy, ox) = acc;
      }
    }
  }
  return out;
}

ImageTensor conv2d_backward_input(const ImageTensor& grad_out, const ConvLayer& layer, const Shape& input_shape) {
  layer.validate();
  const Shape expected = layer.output_shape(input_shape);
  if (grad_out.shape() != expected) {
    throw ShapeError("conv backward: gradient shape " + grad_out.shape().str() + " != forward output " +
                     expected.str());
  }
  ImageTensor grad_in(input_shape);
  const auto h = static_cast<std::ptrdiff_t>(input_shape.height);
  const auto w = static_cast<std::ptrdiff_t>(input_shape.width);
  const auto pad = static_cast<std::ptrdiff_t>(layer.padding);
  const auto stride = static_cast<std::ptrdiff_t>(layer.stride);

  for (std::size_t o = 0; o < expected.channels; ++o) {
    for (std::size_t oy = 0; oy < expected.height; ++oy) {
      for (std::size_t ox = 0; ox < expected.width; ++ox) {
        const float g = grad_out.at(o, oy, ox);
        if (g == 0.0f) continue;
        for (std::size_t i = 0; i < layer.in_channels; ++i) {
          for (std::size_t ky = 0; ky < layer.kernel_h; ++ky) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * stride + static_cast<std::ptrdiff_t>(ky) - pad;
            if (iy < 0 || iy >= h) continue;
            for (std::size_t kx = 0; kx < layer.kernel_w; ++kx) {
              const std::ptrdiff_t ix =
                  static_cast<std::ptrdiff_t>(ox) * stride + static_cast<std::ptrdiff_t>(kx) - pad;
              if (ix < 0 || ix >= w) continue;
              grad_in.at(i, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) += layer.weight(o, i, ky, kx) * g;
            }
          }
        }
      }
    }
  }
  return grad_in;
}

ImageTensor relu_forward(const ImageTensor& input) {
  ImageTensor out = input;
  for (float& v : out.values()) v = v < 0.0f ? 0.0f : v;  // NaN passes through
  return out;
}

ImageTensor relu_backward(const ImageTensor& grad_out, const ImageTensor& forward_input) {
  require_same_shape(grad_out, forward_input, "relu backward");
  ImageTensor grad_in(grad_out.shape());
  auto g = grad_out.values();
  auto x = forward_input.values();
  auto out = grad_in.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > 0.0f ? g[i] : 0.0f;
  return grad_in;
}

ImageTensor avgpool_forward(const ImageTensor& input, std::size_t window, std::size_t stride) {
  const Shape out_shape = AvgPoolLayer{window, stride}.output_shape(input.shape());
  ImageTensor out(out_shape);
  const float scale = 1.0f / static_cast<float>(window * window);
  for (std::size_t c = 0; c < out_shape.channels; ++c) {
    for (std::size_t oy = 0; oy < out_shape.height; ++oy) {
      for (std::size_t ox = 0; ox < out_shape.width; ++ox) {
        float acc = 0.0f;
        for (std::size_t dy = 0; dy < window; ++dy)
          for (std::size_t dx = 0; dx < window; ++dx) acc += input.at(c, oy * stride + dy, ox * stride + dx);
        out.at(c, oy, ox) = acc * scale;
      }
    }
  }
  return out;
}

ImageTensor avgpool_backward(const ImageTensor& grad_out, const Shape& input_shape, std::size_t window,
                             std::size_t stride) {
  const Shape expected = AvgPoolLayer{window, stride}.output_shape(input_shape);
  if (grad_out.shape() != expected) {
    throw ShapeError("pool backward: gradient shape " + grad_out.shape().str() + " != forward output " +
                     expected.str());
  }
  ImageTensor grad_in(input_shape);
  const float scale = 1.0f / static_cast<float>(window * window);
  for (std::size_t c = 0; c < expected.channels; ++c) {
    for (std::size_t oy = 0; oy < expected.height; ++oy) {
      for (std::size_t ox = 0; ox < expected.width; ++ox) {
        const float g = grad_out.at(c, oy, ox) * scale;
        for (std::size_t dy = 0; dy < window; ++dy)
          for (std::size_t dx = 0; dx < window; ++dx) grad_in.at(c, oy * stride + dy, ox * stride + dx) += g;
      }
    }
  }
  return grad_in;
}

ActivationTrace network_forward(const NetworkSpec& net, const ImageTensor& image) {
  if (image.channels() != net.input_channels) {
    throw ShapeError("network expects " + std::to_string(net.input_channels) + " input channels, got " +
                     std::to_string(image.channels()));
  }
  ActivationTrace trace;
  trace.input = image;
  trace.outputs.reserve(net.layers.size());
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const ImageTensor& in = trace.layer_input(k);
    try {
      trace.outputs.push_back(std::visit(
          [&](const auto& layer) -> ImageTensor {
            using T = std::decay_t<decltype(layer)>;
            if constexpr (std::is_same_v<T, ConvLayer>) {
              return conv2d_forward(in, layer);
            } else if constexpr (std::is_same_v<T, ReluLayer>) {
              return relu_forward(in);
            } else {
              return avgpool_forward(in, layer.window, layer.stride);
            }
          },
          net.layers[k]));
    } catch (const ShapeError& e) {
      throw ShapeError(e.what(), k);
    }
  }
  return trace;
}

ImageTensor network_backward(const NetworkSpec& net, const ActivationTrace& trace,
                             const std::map<std::size_t, ImageTensor>& injected) {
  if (trace.size() != net.layers.size()) {
    throw ShapeError("activation trace has " + std::to_string(trace.size()) + " layers, network has " +
                     std::to_string(net.layers.size()));
  }
  for (const auto& [k, g] : injected) {
    if (k >= net.layers.size()) {
      throw ShapeError("gradient injected at layer " + std::to_string(k) + " but network has " +
                       std::to_string(net.layers.size()) + " layers");
    }
    if (g.shape() != trace.outputs[k].shape()) {
      throw ShapeError("injected gradient " + g.shape().str() + " != activation " + trace.outputs[k].shape().str(), k);
    }
  }
  if (injected.empty()) return ImageTensor(trace.input.shape());

  const std::size_t top = injected.rbegin()->first;
  ImageTensor grad(trace.outputs[top].shape());
  for (std::size_t k = top + 1; k-- > 0;) {
    if (auto it = injected.find(k); it != injected.end()) {
      auto dst = grad.values();
      auto src = it->second.values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
    const ImageTensor& in = trace.layer_input(k);
    grad = std::visit(
        [&](const auto& layer) -> ImageTensor {
          using T = std::decay_t<decltype(layer)>;
          if constexpr (std::is_same_v<T, ConvLayer>) {
            return conv2d_backward_input(grad, layer, in.shape());
          } else if constexpr (std::is_same_v<T, ReluLayer>) {
            return relu_backward(grad, in);
          } else {
            return avgpool_backward(grad, in.shape(), layer.window, layer.stride);
          }
        },
        net.layers[k]);
  }
  return grad;
}

namespace {

ConvLayer glorot_conv(SeededUniform& rng, std::size_t in, std::size_t out) {
  ConvLayer conv;
  conv.in_channels = in;
  conv.out_channels = out;
  conv.kernel_h = conv.kernel_w = 3;
  conv.stride = 1;
  conv.padding = 1;
  const double fan_in = static_cast<double>(in * 9);
  const double fan_out = static_cast<double>(out * 9);
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  conv.weights.resize(out * in * 9);
  for (float& v : conv.weights) v = static_cast<float>(rng.next(-a, a));
  conv.bias.assign(out, 0.0f);
  return conv;
}

}  // namespace

NetworkSpec seeded_test_network(std::uint64_t seed, std::size_t depth, std::size_t channels,
                                std::size_t input_channels) {
  if (depth < 1) throw ShapeError("test network depth must be >= 1");
  if (channels < 1 || input_channels < 1) throw ShapeError("test network channel counts must be >= 1");
  SeededUniform rng(seed);
  NetworkSpec net;
  net.input_channels = input_channels;
  std::size_t in = input_channels;
  for (std::size_t d = 0; d < depth; ++d) {
    net.layers.emplace_back(glorot_conv(rng, in, channels));
    net.layers.emplace_back(ReluLayer{});
    in = channels;
  }
  return net;
}

NetworkSpec vgg19_network(std::uint64_t seed) {
  constexpr std::size_t kWidths[5] = {64, 128, 256, 512, 512};
  constexpr std::size_t kConvs[5] = {2, 2, 4, 4, 4};
  SeededUniform rng(seed);
  NetworkSpec net;
  net.input_channels = 3;
  std::size_t in = 3;
  for (int block = 0; block < 5; ++block) {
    for (std::size_t c = 0; c < kConvs[block]; ++c) {
      net.layers.emplace_back(glorot_conv(rng, in, kWidths[block]));
      net.layers.emplace_back(ReluLayer{});
      in = kWidths[block];
    }
    net.layers.emplace_back(AvgPoolLayer{2, 2});
  }
  return net;
}

std::vector<std::size_t> default_style_layers(const NetworkSpec& net) {
  std::vector<std::size_t> picked;
  bool pooled = false;
  for (const auto& layer : net.layers) pooled = pooled || kind_of(layer) == LayerKind::AvgPool;

  if (!pooled) {
    for (std::size_t k = 0; k < net.layers.size(); ++k)
      if (kind_of(net.layers[k]) == LayerKind::Relu) picked.push_back(k);
    return picked;
  }
  bool block_open = true;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const LayerKind kind = kind_of(net.layers[k]);
    if (kind == LayerKind::AvgPool) {
      block_open = true;
    } else if (kind == LayerKind::Conv && block_open) {
      if (k + 1 < net.layers.size() && kind_of(net.layers[k + 1]) == LayerKind::Relu) picked.push_back(k + 1);
      block_open = false;
    }
  }
  return picked;
}

namespace {
constexpr std::string_view kWeightsMagic = "TXSW";
constexpr std::uint32_t kWeightsVersion = 1;
}  // namespace

std::vector<std::uint8_t> serialize_weights(const NetworkSpec& net) {
  net.validate();
  detail::ByteWriter out;
  out.magic(kWeightsMagic);
  out.u32(kWeightsVersion);
  out.u32(static_cast<std::uint32_t>(net.layers.size()));
  for (const auto& layer : net.layers) {
    out.u8(static_cast<std::uint8_t>(kind_of(layer)));
    if (const auto* conv = std::get_if<ConvLayer>(&layer)) {
      out.u32(static_cast<std::uint32_t>(conv->out_channels));
      out.u32(static_cast<std::uint32_t>(conv->in_channels));
      out.u32(static_cast<std::uint32_t>(conv->kernel_h));
      out.u32(static_cast<std::uint32_t>(conv->kernel_w));
      out.u32(static_cast<std::uint32_t>(conv->stride));
      out.u32(static_cast<std::uint32_t>(conv->padding));
      out.f32s(conv->weights);
      out.f32s(conv->bias);
    } else if (const auto* pool = std::get_if<AvgPoolLayer>(&layer)) {
      out.u32(static_cast<std::uint32_t>(pool->window));
      out.u32(static_cast<std::uint32_t>(pool->stride));
    }
  }
  return out.take();
}

NetworkSpec load_weights(std::span<const std::uint8_t> bytes) {
  detail::ByteReader in(bytes, "weights");
  in.expect_magic(kWeightsMagic);
  const std::uint32_t version = in.u32();
  if (version != kWeightsVersion) {
    throw FormatError(FormatErrc::UnsupportedVersion, "weights: unsupported version " + std::to_string(version));
  }
  const std::uint32_t count = in.u32();
  // Every layer takes at least its kind byte.
  if (count > in.remaining()) {
    throw FormatError(FormatErrc::Truncated, "weights: declares " + std::to_string(count) + " layers, stream too short");
  }

  NetworkSpec net;
  bool have_input = false;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint8_t kind = in.u8();
    switch (kind) {
      case 0: {
        ConvLayer conv;
        conv.out_channels = in.u32();
        conv.in_channels = in.u32();
        conv.kernel_h = in.u32();
        conv.kernel_w = in.u32();
        conv.stride = in.u32();
        conv.padding = in.u32();
        if (conv.out_channels == 0 || conv.in_channels == 0 || conv.kernel_h == 0 || conv.kernel_w == 0 ||
            conv.stride == 0) {
          throw FormatError(FormatErrc::InvalidValue, "weights: layer " + std::to_string(k) +
                                                          " has a zero dimension or stride");
        }
        const std::uint64_t n = static_cast<std::uint64_t>(conv.out_channels) * conv.in_channels * conv.kernel_h *
                                conv.kernel_w;
        conv.weights = in.f32s(n);
        conv.bias = in.f32s(conv.out_channels);
        if (!have_input) {
          net.input_channels = conv.in_channels;
          have_input = true;
        }
        net.layers.emplace_back(std::move(conv));
        break;
      }
      case 1:
        net.layers.emplace_back(ReluLayer{});
        break;
      case 2: {
        AvgPoolLayer pool{in.u32(), in.u32()};
        if (pool.window == 0 || pool.stride == 0) {
          throw FormatError(FormatErrc::InvalidValue, "weights: layer " + std::to_string(k) + " has zero pool size");
        }
        net.layers.emplace_back(pool);
        break;
      }
      default:
        throw FormatError(FormatErrc::InvalidValue,
                          "weights: layer " + std::to_string(k) + " has unknown kind " + std::to_string(kind));
    }
  }
  in.expect_end();
  try {
    net.validate();
  } catch (const ShapeError& e) {
    throw FormatError(FormatErrc::ChannelMismatch, std::string("weights: ") + e.what());
  }
  return net;
}

}  // namespace texturesmith
