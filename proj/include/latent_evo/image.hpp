#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "latent_evo/error.hpp"

namespace latent_evo {

// 8-bit RGB, row-major, channels interleaved.
struct Image {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(std::uint32_t w, std::uint32_t h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(std::size_t{w} * h * 3, fill) {}
  Image(std::uint32_t w, std::uint32_t h, std::vector<std::uint8_t> data)
      : width(w), height(h), pixels(std::move(data)) {
    if (pixels.size() != std::size_t{w} * h * 3)
      throw ShapeMismatch("image byte count does not equal width*height*3");
  }

  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) {
    return pixels[(y * width + x) * 3 + c];
  }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const {
    return pixels[(y * width + x) * 3 + c];
  }

  friend bool operator==(const Image&, const Image&) = default;
};

inline std::vector<std::uint8_t> encode_ppm(const Image& img) {
  const std::string header =
      "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

/// Parses a binary P6 with maxval 255. Any structural problem, including a
/// short pixel payload, raises MalformedOutput.
inline Image decode_ppm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&]() -> std::uint64_t {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos]))
      throw MalformedOutput("PPM header is truncated or not numeric");
    std::uint64_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > (1u << 24)) throw MalformedOutput("PPM dimension out of range");
    }
    return v;
  };

  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6')
    throw MalformedOutput("output is not a binary PPM (P6)");
  pos = 2;
  const auto w = number();
  const auto h = number();
  const auto maxval = number();
  if (w == 0 || h == 0) throw MalformedOutput("PPM has a zero dimension");
  if (maxval != 255) throw MalformedOutput("PPM maxval must be 255");
  if (pos >= bytes.size() || !std::isspace(bytes[pos]))
    throw MalformedOutput("PPM header not terminated");
  ++pos;
  const std::size_t need = static_cast<std::size_t>(w * h * 3);
  if (bytes.size() - pos != need)
    throw MalformedOutput("PPM payload has " + std::to_string(bytes.size() - pos) +
                          " bytes, expected " + std::to_string(need));
  return Image(static_cast<std::uint32_t>(w), static_cast<std::uint32_t>(h),
               std::vector<std::uint8_t>(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end()));
}

inline void write_ppm_file(const std::string& path, const Image& img) {
  const auto bytes = encode_ppm(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace latent_evo
