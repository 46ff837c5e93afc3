#pragma once

#include <array>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

#include <jpeglib.h>

#include "latent_evo/error.hpp"
#include "latent_evo/image.hpp"
#include "latent_evo/latent.hpp"

namespace latent_evo {

enum class Direction { Maximize, Minimize };

inline std::string to_string(Direction d) { return d == Direction::Maximize ? "maximize" : "minimize"; }

inline Direction direction_from_string(const std::string& s) {
  if (s == "maximize") return Direction::Maximize;
  if (s == "minimize") return Direction::Minimize;
  throw BadConfig("unknown reward direction '" + s + "'");
}

inline constexpr int kDefaultJpegQuality = 75;

namespace detail {

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

extern "C" inline void jpeg_error_exit_to_jump(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

}  // namespace detail

/// Baseline sequential JPEG, 4:2:0 chroma, standard Huffman tables.
inline std::vector<std::uint8_t> encode_jpeg(const Image& img, int quality = kDefaultJpegQuality) {
  if (img.width == 0 || img.height == 0 || img.pixels.size() != std::size_t{img.width} * img.height * 3)
    throw EncodeFailed("invalid image for JPEG encoding");
  if (quality < 1 || quality > 100) throw EncodeFailed("JPEG quality must be in [1, 100]");

  jpeg_compress_struct cinfo{};
  detail::JpegErrorManager err{};
  unsigned char* buffer = nullptr;
  unsigned long size = 0;

  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = detail::jpeg_error_exit_to_jump;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    std::free(buffer);
    throw EncodeFailed(std::string("JPEG encoder failed: ") + err.message);
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &buffer, &size);
  cinfo.image_width = img.width;
  cinfo.image_height = img.height;
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  cinfo.comp_info[0].h_samp_factor = 2;
  cinfo.comp_info[0].v_samp_factor = 2;
  cinfo.comp_info[1].h_samp_factor = cinfo.comp_info[1].v_samp_factor = 1;
  cinfo.comp_info[2].h_samp_factor = cinfo.comp_info[2].v_samp_factor = 1;
  cinfo.optimize_coding = FALSE;
  jpeg_start_compress(&cinfo, TRUE);
  const std::size_t stride = std::size_t{img.width} * 3;
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = const_cast<JSAMPROW>(img.pixels.data() + cinfo.next_scanline * stride);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);

  std::vector<std::uint8_t> out(buffer, buffer + size);
  std::free(buffer);
  return out;
}

// Encoded size in bytes; smaller is better.
inline double reward_jpeg_size(const Image& img, int quality = kDefaultJpegQuality) {
  return static_cast<double>(encode_jpeg(img, quality).size());
}

inline std::array<double, 3> channel_means(const Image& img) {
  std::array<double, 3> sum{0, 0, 0};
  const std::size_t n = std::size_t{img.width} * img.height;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < 3; ++c) sum[c] += img.pixels[i * 3 + c];
  for (auto& s : sum) s /= static_cast<double>(n);
  return sum;
}

inline double reward_target_mean(const Image& img, const std::array<double, 3>& target) {
  const auto m = channel_means(img);
  double d2 = 0.0;
  for (std::size_t c = 0; c < 3; ++c) d2 += (m[c] - target[c]) * (m[c] - target[c]);
  return -std::sqrt(d2);
}

// Negative mean absolute difference over horizontal and vertical neighbours.
inline double reward_smoothness(const Image& img) {
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        const int v = img.at(x, y, c);
        if (x + 1 < img.width) {
          total += std::abs(v - img.at(x + 1, y, c));
          ++pairs;
        }
        if (y + 1 < img.height) {
          total += std::abs(v - img.at(x, y + 1, c));
          ++pairs;
        }
      }
  return pairs ? -total / static_cast<double>(pairs) : 0.0;
}

// -|z - z*|^2 evaluated directly on the latent.
inline double reward_sphere(const LatentTensor& z, const LatentTensor& target) {
  if (z.shape() != target.shape()) throw ShapeMismatch("sphere target shape differs from latent");
  double d2 = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double diff = z.values()[i] - target.values()[i];
    d2 += diff * diff;
  }
  return -d2;
}

// ---------------------------------------------------------------------------

/// A scoring function over generated images (or, for analytic proxies, over
/// the latent itself). `oriented` returns the value engines maximize.
class Reward {
 public:
  virtual ~Reward() = default;
  virtual std::string name() const = 0;
  virtual Direction direction() const = 0;
  virtual bool needs_image() const { return true; }
  // Raw reward in its natural units; `img` is null when needs_image() is false.
  virtual double score(const Image* img, const LatentTensor& latent) const = 0;

  double oriented(double raw) const { return direction() == Direction::Minimize ? -raw : raw; }
};

class JpegSizeReward final : public Reward {
 public:
  explicit JpegSizeReward(int quality = kDefaultJpegQuality, Direction dir = Direction::Minimize)
      : quality_(quality), dir_(dir) {}
  std::string name() const override { return "jpeg_size"; }
  Direction direction() const override { return dir_; }
  double score(const Image* img, const LatentTensor&) const override {
    return reward_jpeg_size(*img, quality_);
  }

 private:
  int quality_;
  Direction dir_;
};

class TargetMeanReward final : public Reward {
 public:
  explicit TargetMeanReward(std::array<double, 3> target, Direction dir = Direction::Maximize)
      : target_(target), dir_(dir) {}
  std::string name() const override { return "target_mean"; }
  Direction direction() const override { return dir_; }
  double score(const Image* img, const LatentTensor&) const override {
    return reward_target_mean(*img, target_);
  }
  const std::array<double, 3>& target() const noexcept { return target_; }

 private:
  std::array<double, 3> target_;
  Direction dir_;
};

class SmoothnessReward final : public Reward {
 public:
  explicit SmoothnessReward(Direction dir = Direction::Maximize) : dir_(dir) {}
  std::string name() const override { return "smoothness"; }
  Direction direction() const override { return dir_; }
  double score(const Image* img, const LatentTensor&) const override { return reward_smoothness(*img); }

 private:
  Direction dir_;
};

class SphereProxyReward final : public Reward {
 public:
  explicit SphereProxyReward(LatentTensor target, Direction dir = Direction::Maximize)
      : target_(std::move(target)), dir_(dir) {}
  std::string name() const override { return "sphere_proxy"; }
  Direction direction() const override { return dir_; }
  bool needs_image() const override { return false; }
  double score(const Image*, const LatentTensor& latent) const override {
    return reward_sphere(latent, target_);
  }
  const LatentTensor& target() const noexcept { return target_; }

 private:
  LatentTensor target_;
  Direction dir_;
};

}  // namespace latent_evo
