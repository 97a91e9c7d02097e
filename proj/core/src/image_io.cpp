#include "stereofov/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "stereofov/errors.hpp"

namespace stereofov::io {
namespace {

void write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void flush_noop(png_structp) {}

struct ReadCursor {
  const std::vector<std::uint8_t>* bytes;
  std::size_t offset;
};

void read_from_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->offset + length > cur->bytes->size()) png_error(png, "truncated PNG");
  std::memcpy(data, cur->bytes->data() + cur->offset, length);
  cur->offset += length;
}

[[noreturn]] void png_fail(png_structp, png_const_charp msg) { throw IoError(msg); }

}  // namespace

std::vector<std::uint8_t> encode_png(const GrayImage& img) {
  if (img.empty()) throw IoError("encode_png: empty image");
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, nullptr);
  if (png == nullptr) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  try {
    png_set_write_fn(png, &out, write_to_vector, flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()),
                 static_cast<png_uint_32>(img.height()), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(static_cast<std::size_t>(img.width()));
    for (int y = 0; y < img.height(); ++y) {
      const auto src = img.row(y);
      std::ranges::transform(src, row.begin(), [](double v) {
        return static_cast<png_byte>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
      });
      png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

void write_png(const std::filesystem::path& path, const GrayImage& img) {
  write_file(path, encode_png(img));
}

GrayImage decode_png(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw IoError("not a PNG");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, nullptr);
  if (png == nullptr) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  GrayImage img;
  try {
    ReadCursor cursor{&bytes, 0};
    png_set_read_fn(png, &cursor, read_from_vector);
    png_read_info(png, info);
    const auto width = static_cast<int>(png_get_image_width(png, info));
    const auto height = static_cast<int>(png_get_image_height(png, info));
    const int bit_depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);

    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) {
      png_set_strip_alpha(png);
    }
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
        color == PNG_COLOR_TYPE_PALETTE) {
      png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    }
    if (bit_depth == 16) png_set_swap(png);  // host little-endian
    png_read_update_info(png, info);

    const bool wide = png_get_bit_depth(png, info) == 16;
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    std::vector<png_byte> row(rowbytes);
    img = GrayImage(width, height);
    for (int y = 0; y < height; ++y) {
      png_read_row(png, row.data(), nullptr);
      auto dst = img.row(y);
      for (int x = 0; x < width; ++x) {
        if (wide) {
          std::uint16_t v = 0;
          std::memcpy(&v, row.data() + 2 * static_cast<std::size_t>(x), 2);
          dst[static_cast<std::size_t>(x)] = v / 65535.0;
        } else {
          dst[static_cast<std::size_t>(x)] = row[static_cast<std::size_t>(x)] / 255.0;
        }
      }
    }
    png_read_end(png, nullptr);
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

GrayImage read_png(const std::filesystem::path& path) { return decode_png(read_file(path)); }

std::vector<std::uint8_t> encode_u16le(const ScalarField& field, double scale) {
  std::vector<std::uint8_t> out;
  out.reserve(field.size() * 2);
  for (double v : field.pixels()) {
    const double q = std::clamp(std::round(v * scale), 0.0, 65535.0);
    const auto u = static_cast<std::uint16_t>(q);
    out.push_back(static_cast<std::uint8_t>(u & 0xFFu));
    out.push_back(static_cast<std::uint8_t>(u >> 8));
  }
  return out;
}

ScalarField decode_u16le(const std::vector<std::uint8_t>& bytes, int width, int height,
                         double scale) {
  ScalarField f(width, height);
  if (bytes.size() != f.size() * 2) throw IoError("decode_u16le: size mismatch");
  auto px = f.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    const auto u = static_cast<std::uint16_t>(bytes[2 * i] | (bytes[2 * i + 1] << 8));
    px[i] = u / scale;
  }
  return f;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace stereofov::io
