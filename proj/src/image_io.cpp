#include "texturesmith/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "texturesmith/error.hpp"

namespace texturesmith {

namespace fs = std::filesystem;

namespace {

std::uint8_t to_byte(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

class PnmHeader {
 public:
  explicit PnmHeader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t number() {
    skip_space_and_comments();
    std::size_t value = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_++] - '0');
      if (++digits > 9) throw FormatError(FormatErrc::InvalidValue, "pnm: header number too large");
    }
    if (digits == 0) throw FormatError(FormatErrc::InvalidValue, "pnm: corrupt header");
    return value;
  }
  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw FormatError(FormatErrc::Truncated, "pnm: header not terminated");
    }
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 2;
};

bool is_png(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

ImageTensor decode_png(std::span<const std::uint8_t> bytes) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    throw FormatError(FormatErrc::InvalidValue, std::string("png: ") + png.message);
  }
  const bool colour = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.format = colour ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const std::size_t channels = colour ? 3 : 1;
  std::vector<std::uint8_t> raster(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, raster.data(), 0, nullptr)) {
    std::string msg = png.message;
    png_image_free(&png);
    throw FormatError(FormatErrc::InvalidValue, "png: " + msg);
  }
  ImageTensor out(channels, png.height, png.width);
  for (std::size_t y = 0; y < png.height; ++y)
    for (std::size_t x = 0; x < png.width; ++x)
      for (std::size_t c = 0; c < channels; ++c)
        out.at(c, y, x) = static_cast<float>(raster[(y * png.width + x) * channels + c]) / 255.0f;
  return out;
}

void write_png(const ImageTensor& image, const fs::path& path) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw FormatError(FormatErrc::InvalidValue, "png: cannot write a " + std::to_string(image.channels()) +
                                                    "-channel image");
  }
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width());
  png.height = static_cast<png_uint_32>(image.height());
  png.format = image.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const std::size_t channels = image.channels();
  std::vector<std::uint8_t> raster(image.size());
  for (std::size_t y = 0; y < image.height(); ++y)
    for (std::size_t x = 0; x < image.width(); ++x)
      for (std::size_t c = 0; c < channels; ++c)
        raster[(y * image.width() + x) * channels + c] = to_byte(image.at(c, y, x));
  if (!png_image_write_to_file(&png, path.string().c_str(), 0, raster.data(), 0, nullptr)) {
    throw IoError("cannot write " + path.string() + ": " + png.message);
  }
}

}  // namespace

ImageTensor decode_pnm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '6' && bytes[1] != '5')) {
    throw FormatError(FormatErrc::BadMagic, "unsupported image format (expected P6/P5 PNM or PNG)");
  }
  const std::size_t channels = bytes[1] == '6' ? 3 : 1;
  PnmHeader header(bytes);
  const std::size_t width = header.number();
  const std::size_t height = header.number();
  const std::size_t maxval = header.number();
  if (maxval != 255) throw FormatError(FormatErrc::InvalidValue, "pnm: only maxval 255 is supported");
  if (width == 0 || height == 0) throw FormatError(FormatErrc::InvalidValue, "pnm: empty image");
  const std::size_t offset = header.raster_offset();
  const std::size_t needed = width * height * channels;
  if (bytes.size() - offset < needed) throw FormatError(FormatErrc::Truncated, "pnm: raster truncated");

  ImageTensor out(channels, height, width);
  const std::uint8_t* raster = bytes.data() + offset;
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x)
      for (std::size_t c = 0; c < channels; ++c)
        out.at(c, y, x) = static_cast<float>(raster[(y * width + x) * channels + c]) / 255.0f;
  return out;
}

std::vector<std::uint8_t> encode_pnm(const ImageTensor& image) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw FormatError(FormatErrc::InvalidValue, "pnm: cannot write a " + std::to_string(image.channels()) +
                                                    "-channel image");
  }
  const std::string header = std::string(image.channels() == 3 ? "P6" : "P5") + "\n" +
                             std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + image.size());
  for (std::size_t y = 0; y < image.height(); ++y)
    for (std::size_t x = 0; x < image.width(); ++x)
      for (std::size_t c = 0; c < image.channels(); ++c) out.push_back(to_byte(image.at(c, y, x)));
  return out;
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

ImageTensor load_image(const fs::path& path) {
  const auto bytes = read_file(path);
  return is_png(bytes) ? decode_png(bytes) : decode_pnm(bytes);
}

void save_image(const ImageTensor& image, const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") {
    write_png(image, path);
  } else {
    write_file(path, encode_pnm(image));
  }
}

void save_mask(const Mask& mask, const fs::path& path) {
  ImageTensor gray(1, mask.height, mask.width);
  for (std::size_t i = 0; i < mask.values.size(); ++i) gray.values()[i] = static_cast<float>(mask.values[i]);
  save_image(gray, path);
}

Mask load_mask(const fs::path& path) {
  const ImageTensor image = load_image(path);
  Mask mask(image.height(), image.width());
  auto first = image.channel(0);
  for (std::size_t i = 0; i < first.size(); ++i) mask.values[i] = first[i];
  return mask;
}

}  // namespace texturesmith
