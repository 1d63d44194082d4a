#include "foodtrack/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "foodtrack/error.hpp"

namespace foodtrack {

namespace {

class PnmReader {
 public:
  explicit PnmReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  // Next header integer, skipping whitespace and '#' comments.
  int next_int() {
    skip_space();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) throw FormatError("PNM: malformed header");
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_++] - '0');
      if (value > 1 << 24) throw FormatError("PNM: header value too large");
    }
    return static_cast<int>(value);
  }

  // Exactly one whitespace byte separates the header from binary data.
  void end_header() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) throw FormatError("PNM: malformed header");
    ++pos_;
  }

  std::span<const std::uint8_t> rest() const { return bytes_.subspan(pos_); }

 private:
  void skip_space() {
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

Tensor decode_pnm(std::span<const std::uint8_t> bytes) {
  const char kind = static_cast<char>(bytes[1]);
  PnmReader reader(bytes);
  const int width = reader.next_int();
  const int height = reader.next_int();
  const int maxval = reader.next_int();
  if (width <= 0 || height <= 0) throw FormatError("PNM: image has no pixels");
  if (maxval <= 0 || maxval > 65535) throw FormatError("PNM: invalid maxval");
  const int src_channels = kind == '5' ? 1 : 3;
  const std::size_t samples = static_cast<std::size_t>(width) * height * src_channels;

  std::vector<float> values(samples);
  if (kind == '3') {
    for (std::size_t i = 0; i < samples; ++i) {
      const int v = reader.next_int();
      if (v > maxval) throw FormatError("PNM: sample exceeds maxval");
      values[i] = static_cast<float>(v) / maxval;
    }
  } else {
    reader.end_header();
    const auto data = reader.rest();
    const std::size_t width_bytes = maxval > 255 ? 2 : 1;
    if (data.size() < samples * width_bytes) throw FormatError("PNM: pixel data truncated");
    for (std::size_t i = 0; i < samples; ++i) {
      const int v = width_bytes == 2 ? (data[2 * i] << 8 | data[2 * i + 1]) : data[i];
      if (v > maxval) throw FormatError("PNM: sample exceeds maxval");
      values[i] = static_cast<float>(v) / maxval;
    }
  }

  Tensor image(height, width, 3);
  auto dst = image.data();
  for (std::size_t p = 0; p < static_cast<std::size_t>(width) * height; ++p) {
    for (int c = 0; c < 3; ++c) dst[p * 3 + c] = values[p * src_channels + (src_channels == 1 ? 0 : c)];
  }
  return image;
}

Tensor decode_png(std::span<const std::uint8_t> bytes) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    throw FormatError(std::string("PNG: ") + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  if (img.width == 0 || img.height == 0 || img.width > (1u << 15) || img.height > (1u << 15)) {
    png_image_free(&img);
    throw FormatError("PNG: unsupported dimensions");
  }
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, pixels.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw FormatError("PNG: " + msg);
  }
  Tensor image(static_cast<int>(img.height), static_cast<int>(img.width), 3);
  auto dst = image.data();
  for (std::size_t i = 0; i < pixels.size(); ++i) dst[i] = pixels[i] / 255.0f;
  return image;
}

std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

void require_rgb(const Tensor& image, const char* what) {
  if (image.channels() != 3 || image.empty()) throw ShapeError(std::string(what) + ": image must be HxWx3");
}

}  // namespace

Tensor decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '6' || bytes[1] == '3' || bytes[1] == '5')) {
    return decode_pnm(bytes);
  }
  static constexpr std::uint8_t kPngMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::equal(bytes.begin(), bytes.begin() + 8, kPngMagic)) {
    return decode_png(bytes);
  }
  throw FormatError("unrecognized image format (expected PPM/PGM or PNG)");
}

std::vector<std::uint8_t> encode_ppm(const Tensor& image) {
  require_rgb(image, "encode_ppm");
  const std::string header =
      "P6\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + image.size());
  for (float v : image.data()) out.push_back(to_byte(v));
  return out;
}

std::vector<std::uint8_t> encode_png(const Tensor& image) {
  require_rgb(image, "encode_png");
  std::vector<std::uint8_t> pixels;
  pixels.reserve(image.size());
  for (float v : image.data()) pixels.push_back(to_byte(v));

  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
    throw FormatError(std::string("PNG encode: ") + img.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
    throw FormatError(std::string("PNG encode: ") + img.message);
  }
  out.resize(size);
  return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to " + path.string());
}

Tensor resize_bilinear(const Tensor& image, int height, int width) {
  if (height <= 0 || width <= 0) throw ShapeError("resize_bilinear: target size must be positive");
  if (image.empty()) throw ShapeError("resize_bilinear: empty image");
  const int ch = image.channels();
  Tensor out(height, width, ch);
  const double sy = static_cast<double>(image.height()) / height;
  const double sx = static_cast<double>(image.width()) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(image.height() - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(image.width() - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width() - 1);
      const double wx = fx - x0;
      for (int c = 0; c < ch; ++c) {
        const double top = image.at(y0, x0, c) * (1.0 - wx) + image.at(y0, x1, c) * wx;
        const double bottom = image.at(y1, x0, c) * (1.0 - wx) + image.at(y1, x1, c) * wx;
        out.at(y, x, c) = static_cast<float>(top * (1.0 - wy) + bottom * wy);
      }
    }
  }
  return out;
}

}  // namespace foodtrack
