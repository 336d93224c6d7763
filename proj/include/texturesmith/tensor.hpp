#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace texturesmith {

struct Shape {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const noexcept { return channels * height * width; }
  std::size_t plane() const noexcept { return height * width; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Dense channels x height x width array of 32-bit reals, channel-major
/// (channel, then row, then column). Holds both images and layer activations.
class ImageTensor {
 public:
  ImageTensor() = default;
  explicit ImageTensor(Shape shape, float fill = 0.0f);
  ImageTensor(std::size_t channels, std::size_t height, std::size_t width, float fill = 0.0f)
      : ImageTensor(Shape{channels, height, width}, fill) {}
  /// Throws ShapeError unless `values.size() == shape.size()`.
  ImageTensor(Shape shape, std::vector<float> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t channels() const noexcept { return shape_.channels; }
  std::size_t height() const noexcept { return shape_.height; }
  std::size_t width() const noexcept { return shape_.width; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  float& at(std::size_t c, std::size_t y, std::size_t x) {
    return values_[(c * shape_.height + y) * shape_.width + x];
  }
  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return values_[(c * shape_.height + y) * shape_.width + x];
  }

  std::span<float> values() noexcept { return values_; }
  std::span<const float> values() const noexcept { return values_; }
  std::span<float> channel(std::size_t c) noexcept {
    return std::span<float>(values_).subspan(c * shape_.plane(), shape_.plane());
  }
  std::span<const float> channel(std::size_t c) const noexcept {
    return std::span<const float>(values_).subspan(c * shape_.plane(), shape_.plane());
  }

  bool all_finite() const noexcept;
  bool operator==(const ImageTensor&) const = default;

 private:
  Shape shape_{};
  std::vector<float> values_;
};

/// Inner product accumulated in 64-bit.
double dot(const ImageTensor& a, const ImageTensor& b);

/// Copies the rectangle [y0, y0+h) x [x0, x0+w) of every channel.
ImageTensor crop(const ImageTensor& image, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w);

}  // namespace texturesmith
