#ifndef BSQ_PNM_HPP
#define BSQ_PNM_HPP

#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bsq/byte_io.hpp"
#include "bsq/error.hpp"

namespace bsq {

// Grayscale image with pixels in [0, 1], row-major.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> pixels;

  double at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
  double& at(std::size_t row, std::size_t col) { return pixels[row * width + col]; }
};

namespace detail {

inline void skip_pnm_space(ByteReader& r, std::span<const std::uint8_t> data) {
  while (r.remaining() > 0) {
    const std::uint8_t c = data[r.position()];
    if (c == '#') {
      while (r.remaining() > 0 && r.u8() != '\n') {
      }
    } else if (std::isspace(c)) {
      r.u8();
    } else {
      break;
    }
  }
}

inline std::size_t read_pnm_int(ByteReader& r, std::span<const std::uint8_t> data) {
  skip_pnm_space(r, data);
  std::size_t v = 0;
  int digits = 0;
  while (r.remaining() > 0 && std::isdigit(data[r.position()])) {
    v = v * 10 + (r.u8() - '0');
    if (++digits > 9) fail(ErrorKind::BadDimensions, "PNM header value too large");
  }
  if (digits == 0) fail(ErrorKind::BadDimensions, "malformed PNM header");
  return v;
}

}  // namespace detail

// Parses binary PGM (P5) or PPM (P6). PPM is converted to gray with Rec. 601 luma.
inline GrayImage parse_pnm(std::span<const std::uint8_t> data) {
  ByteReader r(data, ErrorKind::BadDimensions);
  const std::string_view magic = r.tag(2);
  if (magic != "P5" && magic != "P6") fail(ErrorKind::BadMagic, "only binary PGM (P5) and PPM (P6) are supported");
  const bool color = magic == "P6";
  GrayImage img;
  img.width = detail::read_pnm_int(r, data);
  img.height = detail::read_pnm_int(r, data);
  const std::size_t maxval = detail::read_pnm_int(r, data);
  if (img.width == 0 || img.height == 0) fail(ErrorKind::BadDimensions, "image has zero size");
  if (maxval == 0 || maxval > 65535) fail(ErrorKind::BadDimensions, "PNM maxval must be in [1, 65535]");
  r.u8();  // single whitespace before the raster
  const std::size_t sample_bytes = maxval > 255 ? 2 : 1;
  const std::size_t channels = color ? 3 : 1;
  img.pixels.resize(img.width * img.height);
  for (double& px : img.pixels) {
    double c[3] = {0.0, 0.0, 0.0};
    for (std::size_t ch = 0; ch < channels; ++ch) {
      // PNM stores 16-bit samples big-endian.
      std::uint32_t s = r.u8();
      if (sample_bytes == 2) s = (s << 8) | r.u8();
      c[ch] = static_cast<double>(s) / static_cast<double>(maxval);
    }
    px = color ? 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2] : c[0];
  }
  return img;
}

inline GrayImage read_pnm(const std::filesystem::path& path) { return parse_pnm(read_file(path)); }

// 8-bit binary PGM; pixels are clamped to [0, 1] and rounded.
inline Bytes encode_pgm(const GrayImage& img) {
  const std::string header = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  Bytes out(header.begin(), header.end());
  out.reserve(out.size() + img.pixels.size());
  for (double px : img.pixels) {
    const double c = px < 0.0 ? 0.0 : (px > 1.0 ? 1.0 : px);
    out.push_back(static_cast<std::uint8_t>(std::lround(c * 255.0)));
  }
  return out;
}

inline void write_pgm(const std::filesystem::path& path, const GrayImage& img) { write_file_atomic(path, encode_pgm(img)); }

// Binary PBM (P4): set bits are black, rows padded to whole bytes.
inline Bytes encode_pbm(std::size_t width, std::size_t height, const std::vector<bool>& bits) {
  const std::string header = "P4\n" + std::to_string(width) + " " + std::to_string(height) + "\n";
  Bytes out(header.begin(), header.end());
  const std::size_t row_bytes = (width + 7) / 8;
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t b = 0; b < row_bytes; ++b) {
      std::uint8_t byte = 0;
      for (std::size_t k = 0; k < 8; ++k) {
        const std::size_t c = b * 8 + k;
        if (c < width && bits[r * width + c]) byte |= static_cast<std::uint8_t>(0x80U >> k);
      }
      out.push_back(byte);
    }
  }
  return out;
}

}  // namespace bsq

#endif  // BSQ_PNM_HPP
