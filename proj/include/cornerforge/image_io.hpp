#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cornerforge/imaging.hpp"

namespace cornerforge {

struct ImageDims {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
};

/// Decode a PNG or JPEG file into RGB8. Alpha is composited onto black,
/// grayscale is expanded, 16-bit channels are stripped to 8.
ImageBuffer read_image(const std::filesystem::path& path);

/// Reads only the header.
ImageDims read_image_dims(const std::filesystem::path& path);

ImageBuffer decode_png(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_png(const ImageBuffer& image);

void write_png(const std::filesystem::path& path, const ImageBuffer& image);

/// Mask assets are single-channel PNGs where a value >= 128 means set.
BinaryMask read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const BinaryMask& mask);
std::vector<std::uint8_t> encode_mask_png(const BinaryMask& mask);

}  // namespace cornerforge
