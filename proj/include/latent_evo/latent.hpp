#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "latent_evo/error.hpp"
#include "latent_evo/rng.hpp"

namespace latent_evo {

struct LatentShape {
  std::uint32_t channels = 1;
  std::uint32_t height = 1;
  std::uint32_t width = 1;

  std::size_t size() const noexcept {
    return std::size_t{channels} * height * width;
  }
  std::size_t spatial() const noexcept { return std::size_t{height} * width; }

  void validate() const {
    if (channels < 1 || height < 1 || width < 1)
      throw BadConfig("latent shape extents must be >= 1");
    if (size() < 4) throw BadConfig("latent dimensionality must be >= 4");
  }

  friend bool operator==(const LatentShape&, const LatentShape&) = default;
};

/// Real-valued latent in flat row-major (channel, row, column) layout.
class LatentTensor {
 public:
  LatentTensor() = default;

  explicit LatentTensor(LatentShape shape)
      : shape_(shape), values_(shape.size(), 0.0) {
    shape_.validate();
  }

  LatentTensor(LatentShape shape, std::vector<double> values)
      : shape_(shape), values_(std::move(values)) {
    shape_.validate();
    if (values_.size() != shape_.size())
      throw ShapeMismatch("latent value count " + std::to_string(values_.size()) +
                          " does not match shape size " +
                          std::to_string(shape_.size()));
    for (double v : values_)
      if (!std::isfinite(v)) throw InvalidValue("latent contains a non-finite value");
  }

  const LatentShape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> mutable_values() noexcept { return values_; }

  double at(std::size_t c, std::size_t h, std::size_t w) const {
    return values_[(c * shape_.height + h) * shape_.width + w];
  }

  friend bool operator==(const LatentTensor&, const LatentTensor&) = default;

 private:
  LatentShape shape_{};
  std::vector<double> values_;
};

inline LatentTensor sample_standard_gaussian(const LatentShape& shape,
                                             SeededRng rng) {
  shape.validate();
  std::vector<double> values(shape.size());
  for (auto& v : values) v = rng.gaussian();
  return LatentTensor(shape, std::move(values));
}

inline double l2_norm(std::span<const double> values) noexcept {
  double sum = 0.0;
  for (double v : values) sum += v * v;
  return std::sqrt(sum);
}

inline double l2_norm(const LatentTensor& z) noexcept { return l2_norm(z.values()); }

// Distance of the latent from the radius-sqrt(d) Gaussian shell.
inline double shell_distance(const LatentTensor& z) noexcept {
  return std::abs(l2_norm(z) - std::sqrt(static_cast<double>(z.size())));
}

// ---------------------------------------------------------------------------
// Binary container: "LEVO", u16 version, u32 channels/height/width, then
// channels*height*width IEEE-754 binary64 values. Everything little-endian.

inline constexpr std::uint16_t kContainerVersion = 1;

namespace detail {

inline void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint64_t get_le(std::span<const std::uint8_t> in, std::size_t at, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= std::uint64_t{in[at + i]} << (8 * i);
  return v;
}

}  // namespace detail

struct RawContainer {
  std::uint32_t channels = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<double> values;
};

inline std::vector<std::uint8_t> encode_container(std::uint32_t channels, std::uint32_t height,
                                                  std::uint32_t width,
                                                  std::span<const double> values) {
  if (values.size() != std::size_t{channels} * height * width)
    throw ShapeMismatch("container extents do not match value count");
  std::vector<std::uint8_t> out;
  out.reserve(18 + 8 * values.size());
  for (char c : {'L', 'E', 'V', 'O'}) out.push_back(static_cast<std::uint8_t>(c));
  detail::put_le(out, kContainerVersion, 2);
  detail::put_le(out, channels, 4);
  detail::put_le(out, height, 4);
  detail::put_le(out, width, 4);
  for (double v : values) detail::put_le(out, std::bit_cast<std::uint64_t>(v), 8);
  return out;
}

inline RawContainer decode_container(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t kHeader = 18;
  if (bytes.size() < kHeader || bytes[0] != 'L' || bytes[1] != 'E' || bytes[2] != 'V' ||
      bytes[3] != 'O')
    throw FormatError("missing LEVO magic");
  const auto version = detail::get_le(bytes, 4, 2);
  if (version != kContainerVersion)
    throw FormatError("unsupported LEVO version " + std::to_string(version));
  RawContainer raw;
  raw.channels = static_cast<std::uint32_t>(detail::get_le(bytes, 6, 4));
  raw.height = static_cast<std::uint32_t>(detail::get_le(bytes, 10, 4));
  raw.width = static_cast<std::uint32_t>(detail::get_le(bytes, 14, 4));
  const std::size_t count = std::size_t{raw.channels} * raw.height * raw.width;
  if (bytes.size() != kHeader + 8 * count)
    throw FormatError("LEVO payload length does not match header extents");
  raw.values.resize(count);
  for (std::size_t i = 0; i < count; ++i)
    raw.values[i] = std::bit_cast<double>(detail::get_le(bytes, kHeader + 8 * i, 8));
  return raw;
}

inline std::vector<std::uint8_t> encode_latent(const LatentTensor& z) {
  const auto& s = z.shape();
  return encode_container(s.channels, s.height, s.width, z.values());
}

inline LatentTensor decode_latent(std::span<const std::uint8_t> bytes) {
  auto raw = decode_container(bytes);
  return LatentTensor({raw.channels, raw.height, raw.width}, std::move(raw.values));
}

inline void write_latent_file(const std::string& path, const LatentTensor& z) {
  const auto bytes = encode_latent(z);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path);
}

inline LatentTensor read_latent_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_latent(bytes);
}

}  // namespace latent_evo
