#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "foodtrack/tensor.hpp"

namespace foodtrack {

// Decodes binary/ASCII portable pixmaps (P6, P3, P5) and PNG into an
// H x W x 3 tensor with values in [0, 1]. Throws FormatError otherwise.
Tensor decode_image(std::span<const std::uint8_t> bytes);

// 8-bit binary PPM (P6). Values are clamped to [0, 1] and rounded.
std::vector<std::uint8_t> encode_ppm(const Tensor& image);

// 8-bit RGB PNG.
std::vector<std::uint8_t> encode_png(const Tensor& image);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

// Bilinear resampling with pixel-center alignment and edge clamping.
Tensor resize_bilinear(const Tensor& image, int height, int width);

}  // namespace foodtrack
