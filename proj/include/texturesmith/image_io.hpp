#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "texturesmith/segment.hpp"
#include "texturesmith/tensor.hpp"

namespace texturesmith {

/// Decodes binary PPM (P6, 3 channels) or PGM (P5, 1 channel) with maxval
/// 255 into [0, 1] values (byte / 255).
ImageTensor decode_pnm(std::span<const std::uint8_t> bytes);
/// Inverse of decode_pnm: clamps to [0, 1] and rounds value * 255 to the
/// nearest byte. 1-channel tensors become P5, 3-channel tensors P6.
std::vector<std::uint8_t> encode_pnm(const ImageTensor& image);

/// Format chosen by content (PNG signature) for reading and by extension
/// (.png, otherwise PNM) for writing.
ImageTensor load_image(const std::filesystem::path& path);
void save_image(const ImageTensor& image, const std::filesystem::path& path);

/// 8-bit grayscale, 255 = member.
void save_mask(const Mask& mask, const std::filesystem::path& path);
/// First channel of any supported image, as membership in [0, 1].
Mask load_mask(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace texturesmith
