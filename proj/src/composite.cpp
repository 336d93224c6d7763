#include "texturesmith/composite.hpp"

#include <algorithm>
#include <future>
#include <string>

#include "texturesmith/error.hpp"

namespace texturesmith {

void RegionStyleMap::validate(std::size_t height, std::size_t width) const {
  if (entries.empty()) throw ShapeError("region style map has no entries");
  for (const auto& e : entries) {
    if (e.region.height != height || e.region.width != width || e.region.values.size() != height * width) {
      throw ShapeError("region mask " + std::to_string(e.region.height) + "x" + std::to_string(e.region.width) +
                       " does not match the " + std::to_string(height) + "x" + std::to_string(width) + " content");
    }
  }
  for (std::size_t i = 0; i < height * width; ++i) {
    double sum = 0.0;
    for (const auto& e : entries) {
      const double v = e.region.values[i];
      if (v != 0.0 && v != 1.0) throw ShapeError("region masks must be binary");
      sum += v;
    }
    if (sum != 1.0) {
      throw ShapeError("region masks do not partition the image at pixel (" + std::to_string(i / width) + "," +
                       std::to_string(i % width) + ")");
    }
  }
}

Mask feather_mask(const Mask& mask, const FeatherParams& params) {
  const std::size_t r = params.radius;
  if (2 * r > std::min(mask.height, mask.width)) {
    throw ShapeError("feather radius " + std::to_string(r) + " exceeds half of the " + std::to_string(mask.height) +
                     "x" + std::to_string(mask.width) + " mask");
  }
  if (r == 0) return mask;
  const auto h = static_cast<std::ptrdiff_t>(mask.height);
  const auto w = static_cast<std::ptrdiff_t>(mask.width);
  const auto rr = static_cast<std::ptrdiff_t>(r);
  const double scale = 1.0 / static_cast<double>((2 * r + 1) * (2 * r + 1));
  Mask out(mask.height, mask.width);
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t dy = -rr; dy <= rr; ++dy) {
        const auto sy = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(y + dy, 0, h - 1));
        for (std::ptrdiff_t dx = -rr; dx <= rr; ++dx) {
          const auto sx = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(x + dx, 0, w - 1));
          acc += mask.at(sy, sx);
        }
      }
      out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = std::clamp(acc * scale, 0.0, 1.0);
    }
  }
  return out;
}

std::vector<Mask> normalize_soft_masks(const std::vector<Mask>& masks) {
  if (masks.empty()) return {};
  const std::size_t n = masks.front().values.size();
  for (const auto& m : masks) {
    if (m.height != masks.front().height || m.width != masks.front().width || m.values.size() != n) {
      throw ShapeError("soft masks differ in size");
    }
  }
  std::vector<Mask> out = masks;
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (const auto& m : masks) sum += m.values[i];
    if (!(sum > 0.0)) {
      throw ShapeError("no region covers pixel (" + std::to_string(i / masks.front().width) + "," +
                       std::to_string(i % masks.front().width) + ")");
    }
    for (auto& m : out) m.values[i] /= sum;
  }
  return out;
}

ImageTensor composite(const std::vector<ImageTensor>& region_images, const std::vector<Mask>& soft_masks) {
  if (region_images.empty() || region_images.size() != soft_masks.size()) {
    throw ShapeError("composite needs one mask per region image, got " + std::to_string(region_images.size()) +
                     " images and " + std::to_string(soft_masks.size()) + " masks");
  }
  const Shape shape = region_images.front().shape();
  for (std::size_t r = 0; r < region_images.size(); ++r) {
    if (region_images[r].shape() != shape) throw ShapeError("region images differ in shape");
    if (soft_masks[r].height != shape.height || soft_masks[r].width != shape.width) {
      throw ShapeError("mask does not match the " + shape.str() + " region images");
    }
  }
  ImageTensor out(shape);
  const std::size_t plane = shape.plane();
  for (std::size_t c = 0; c < shape.channels; ++c) {
    for (std::size_t p = 0; p < plane; ++p) {
      double acc = 0.0;
      for (std::size_t r = 0; r < region_images.size(); ++r) {
        acc += soft_masks[r].values[p] * static_cast<double>(region_images[r].values()[c * plane + p]);
      }
      out.values()[c * plane + p] = static_cast<float>(acc);
    }
  }
  return out;
}

std::optional<BoundingBox> mask_bounding_box(const Mask& mask) {
  std::size_t y0 = mask.height, x0 = mask.width, y1 = 0, x1 = 0;
  bool any = false;
  for (std::size_t y = 0; y < mask.height; ++y) {
    for (std::size_t x = 0; x < mask.width; ++x) {
      if (mask.at(y, x) < 0.5) continue;
      any = true;
      y0 = std::min(y0, y);
      x0 = std::min(x0, x);
      y1 = std::max(y1, y);
      x1 = std::max(x1, x);
    }
  }
  if (!any) return std::nullopt;
  return BoundingBox{y0, x0, y1 - y0 + 1, x1 - x0 + 1};
}

GramSet region_style_descriptor(const StyleImage& style, const NetworkSpec& net, const SynthesisConfig& cfg) {
  const std::vector<std::size_t> layers = cfg.resolved_layers(net);
  const std::vector<float> weights = cfg.resolved_weights(net);
  if (!style.mask) return style_descriptor(net, style.image, layers, weights, cfg.channel_mean);

  if (style.mask->height != style.image.height() || style.mask->width != style.image.width()) {
    throw ShapeError("style mask does not match its " + style.image.shape().str() + " style image");
  }
  const auto box = mask_bounding_box(*style.mask);
  if (!box) throw ShapeError("style mask selects no pixels");
  const ImageTensor cropped = crop(style.image, box->y0, box->x0, box->height, box->width);
  return style_descriptor(net, cropped, layers, weights, cfg.channel_mean);
}

namespace {

RegionOutcome synthesize_region(const ImageTensor& content, const RegionEntry& entry, const NetworkSpec& net,
                                const SynthesisConfig& base) {
  const SynthesisConfig& cfg = entry.config ? *entry.config : base;
  if (std::holds_alternative<KeepContent>(entry.style)) return {content, {}, 0.0, StopReason::FixedPoint};

  const GramSet target = std::holds_alternative<GramSet>(entry.style)
                             ? std::get<GramSet>(entry.style)
                             : region_style_descriptor(std::get<StyleImage>(entry.style), net, cfg);
  SynthesisResult result = synthesize(content, target, net, cfg);
  return {std::move(result.image), std::move(result.trace), result.final_loss, result.stop};
}

}  // namespace

RegionSynthesis per_region_synthesize(const ImageTensor& content, const RegionStyleMap& map, const NetworkSpec& net,
                                      const SynthesisConfig& cfg, const FeatherParams& feather, Execution execution) {
  map.validate(content.height(), content.width());
  RegionSynthesis out;
  out.regions.resize(map.entries.size());

  if (execution == Execution::Concurrent) {
    std::vector<std::future<RegionOutcome>> pending;
    pending.reserve(map.entries.size());
    for (const auto& entry : map.entries) {
      pending.push_back(std::async(std::launch::async, [&content, &entry, &net, &cfg] {
        return synthesize_region(content, entry, net, cfg);
      }));
    }
    for (std::size_t r = 0; r < pending.size(); ++r) out.regions[r] = pending[r].get();
  } else {
    for (std::size_t r = 0; r < map.entries.size(); ++r) {
      out.regions[r] = synthesize_region(content, map.entries[r], net, cfg);
    }
  }

  std::vector<Mask> feathered;
  feathered.reserve(map.entries.size());
  for (const auto& entry : map.entries) feathered.push_back(feather_mask(entry.region, feather));
  out.soft_masks = normalize_soft_masks(feathered);

  std::vector<ImageTensor> images;
  images.reserve(out.regions.size());
  for (const auto& r : out.regions) images.push_back(r.image);
  out.image = composite(images, out.soft_masks);
  return out;
}

}  // namespace texturesmith
