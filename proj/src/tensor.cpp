#include "texturesmith/tensor.hpp"

#include <cmath>

#include "texturesmith/error.hpp"

namespace texturesmith {

std::string Shape::str() const {
  return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
}

ImageTensor::ImageTensor(Shape shape, float fill) : shape_(shape), values_(shape.size(), fill) {}

ImageTensor::ImageTensor(Shape shape, std::vector<float> values) : shape_(shape), values_(std::move(values)) {
  if (values_.size() != shape_.size()) {
    throw ShapeError("tensor " + shape_.str() + " needs " + std::to_string(shape_.size()) + " values, got " +
                     std::to_string(values_.size()));
  }
}

bool ImageTensor::all_finite() const noexcept {
  for (float v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double dot(const ImageTensor& a, const ImageTensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("dot: " + a.shape().str() + " vs " + b.shape().str());
  double acc = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) acc += static_cast<double>(av[i]) * bv[i];
  return acc;
}

ImageTensor crop(const ImageTensor& image, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
  if (y0 + h > image.height() || x0 + w > image.width()) {
    throw ShapeError("crop rectangle exceeds " + image.shape().str());
  }
  ImageTensor out(image.channels(), h, w);
  for (std::size_t c = 0; c < image.channels(); ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) out.at(c, y, x) = image.at(c, y0 + y, x0 + x);
  return out;
}

}  // namespace texturesmith
