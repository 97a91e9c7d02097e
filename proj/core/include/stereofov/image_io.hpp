#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "stereofov/image.hpp"

namespace stereofov::io {

/// Encodes an image as 8-bit grayscale PNG; values are clamped to [0,1] and
/// rounded to the nearest of 256 levels.
std::vector<std::uint8_t> encode_png(const GrayImage& img);
void write_png(const std::filesystem::path& path, const GrayImage& img);

/// Reads an 8-bit or 16-bit PNG (gray, gray+alpha, RGB or RGBA; color is
/// converted to luma) into [0,1] intensities.
GrayImage read_png(const std::filesystem::path& path);
GrayImage decode_png(const std::vector<std::uint8_t>& bytes);

/// Single-channel 16-bit little-endian raw raster, value = round(field * scale)
/// clamped to [0, 65535].
std::vector<std::uint8_t> encode_u16le(const ScalarField& field, double scale);
ScalarField decode_u16le(const std::vector<std::uint8_t>& bytes, int width, int height,
                         double scale);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace stereofov::io
