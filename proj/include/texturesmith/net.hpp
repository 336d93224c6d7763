#pragma once

// Minimal convolutional network: conv / relu / average-pool layers with
// hand-written forward passes and input-gradient backward passes. Weights are
// fixed; nothing here computes weight gradients.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <variant>
#include <vector>

#include "texturesmith/tensor.hpp"

namespace texturesmith {

struct ConvLayer {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::vector<float> weights;  // out x in x kh x kw
  std::vector<float> bias;     // out

  float weight(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) const {
    return weights[((o * in_channels + i) * kernel_h + ky) * kernel_w + kx];
  }
  /// Throws ShapeError on inconsistent sizes or zero stride.
  void validate() const;
  Shape output_shape(const Shape& input) const;
  bool operator==(const ConvLayer&) const = default;
};

struct ReluLayer {
  bool operator==(const ReluLayer&) const = default;
};

struct AvgPoolLayer {
  std::size_t window = 2;
  std::size_t stride = 2;

  Shape output_shape(const Shape& input) const;
  bool operator==(const AvgPoolLayer&) const = default;
};

using LayerSpec = std::variant<ConvLayer, ReluLayer, AvgPoolLayer>;

enum class LayerKind : std::uint8_t { Conv = 0, Relu = 1, AvgPool = 2 };
LayerKind kind_of(const LayerSpec& layer) noexcept;
const char* kind_name(LayerKind kind) noexcept;

struct NetworkSpec {
  std::size_t input_channels = 3;
  std::vector<LayerSpec> layers;

  /// Checks every layer and the channel chain; the error names the first
  /// offending layer.
  void validate() const;
  /// Shape produced by each layer for an input of `input` shape.
  std::vector<Shape> layer_shapes(const Shape& input) const;
  bool operator==(const NetworkSpec&) const = default;
};

/// Layer outputs of one forward pass. `input` is retained because the first
/// layer's backward pass needs it.
struct ActivationTrace {
  ImageTensor input;
  std::vector<ImageTensor> outputs;

  std::size_t size() const noexcept { return outputs.size(); }
  const ImageTensor& layer_input(std::size_t layer) const { return layer == 0 ? input : outputs[layer - 1]; }
};

ImageTensor conv2d_forward(const ImageTensor& input, const ConvLayer& layer);
/// Adjoint of conv2d_forward with respect to its input (bias does not
/// contribute). `input_shape` is needed because strided output sizes floor.
ImageTensor conv2d_backward_input(const ImageTensor& grad_out, const ConvLayer& layer, const Shape& input_shape);

ImageTensor relu_forward(const ImageTensor& input);
ImageTensor relu_backward(const ImageTensor& grad_out, const ImageTensor& forward_input);

ImageTensor avgpool_forward(const ImageTensor& input, std::size_t window, std::size_t stride);
ImageTensor avgpool_backward(const ImageTensor& grad_out, const Shape& input_shape, std::size_t window,
                             std::size_t stride);

ActivationTrace network_forward(const NetworkSpec& net, const ImageTensor& image);

/// Gradient with respect to the input image of a scalar objective whose
/// gradient with respect to layer k's output is `injected[k]`.
ImageTensor network_backward(const NetworkSpec& net, const ActivationTrace& trace,
                             const std::map<std::size_t, ImageTensor>& injected);

/// Deterministic conv(3x3, stride 1, pad 1) + relu stack, `depth` of each.
/// Weights ~ U(-a, a) with a = sqrt(6 / (fan_in + fan_out)); zero bias.
NetworkSpec seeded_test_network(std::uint64_t seed, std::size_t depth, std::size_t channels,
                                std::size_t input_channels = 3);

/// VGG-19 layer layout (16 convolutions in five blocks, average pooling
/// between blocks) filled with seeded weights. Real weights come from a
/// weights file with the same layout.
NetworkSpec vgg19_network(std::uint64_t seed);

/// Default texture layers: every relu output, or, when the network has
/// pooling, the relu after the first convolution of each block.
std::vector<std::size_t> default_style_layers(const NetworkSpec& net);

/// TXSW binary weights format.
std::vector<std::uint8_t> serialize_weights(const NetworkSpec& net);
NetworkSpec load_weights(std::span<const std::uint8_t> bytes);

}  // namespace texturesmith
