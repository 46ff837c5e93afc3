#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "latent_evo/base64.hpp"
#include "latent_evo/error.hpp"
#include "latent_evo/latent.hpp"

namespace latent_evo {

/// Dense row-major square matrix; sized for channel transforms (a handful of rows).
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n) : n_(n), a_(n * n, 0.0) {}
  SquareMatrix(std::size_t n, std::vector<double> values) : n_(n), a_(std::move(values)) {
    if (a_.size() != n * n) throw ShapeMismatch("matrix value count is not n*n");
    for (double v : a_)
      if (!std::isfinite(v)) throw InvalidValue("matrix contains a non-finite value");
  }

  static SquareMatrix identity(std::size_t n) {
    SquareMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t dim() const noexcept { return n_; }
  double& operator()(std::size_t r, std::size_t c) noexcept { return a_[r * n_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return a_[r * n_ + c]; }
  std::span<const double> values() const noexcept { return a_; }
  std::span<double> mutable_values() noexcept { return a_; }

  friend bool operator==(const SquareMatrix&, const SquareMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> a_;
};

inline SquareMatrix multiply(const SquareMatrix& a, const SquareMatrix& b) {
  const std::size_t n = a.dim();
  if (b.dim() != n) throw ShapeMismatch("matrix dimensions differ");
  SquareMatrix out(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t j = 0; j < n; ++j) out(i, j) += a(i, k) * b(k, j);
  return out;
}

inline SquareMatrix transpose(const SquareMatrix& a) {
  SquareMatrix out(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t j = 0; j < a.dim(); ++j) out(j, i) = a(i, j);
  return out;
}

// Largest |(Q^T Q - I)_ij|.
inline double orthonormality_error(const SquareMatrix& q) {
  const std::size_t n = q.dim();
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < n; ++k) dot += q(k, i) * q(k, j);
      worst = std::max(worst, std::abs(dot - (i == j ? 1.0 : 0.0)));
    }
  return worst;
}

inline constexpr double kRankTolerance = 1e-12;

/// Orthonormal factor of A = QR via Householder reflections, normalized so
/// that diag(R) >= 0 (which makes Q unique for full-rank A).
///
/// Throws SingularInput naming the first column whose R diagonal falls below
/// kRankTolerance relative to the Frobenius norm of A.
inline SquareMatrix qr_orthonormal(const SquareMatrix& a) {
  const std::size_t n = a.dim();
  if (n < 1) throw ShapeMismatch("QR needs at least one channel");

  double frob = 0.0;
  for (double v : a.values()) frob += v * v;
  frob = std::sqrt(frob);
  const double tol = kRankTolerance * frob;

  SquareMatrix r = a;
  SquareMatrix q = SquareMatrix::identity(n);
  std::vector<double> v(n);

  for (std::size_t k = 0; k < n; ++k) {
    double below = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) below += r(i, k) * r(i, k);
    if (below == 0.0) continue;  // column already triangular

    const double x0 = r(k, k);
    const double norm = std::sqrt(below + x0 * x0);
    const double alpha = x0 > 0 ? -norm : norm;
    std::fill(v.begin(), v.end(), 0.0);
    v[k] = x0 - alpha;
    for (std::size_t i = k + 1; i < n; ++i) v[i] = r(i, k);
    const double vnorm2 = v[k] * v[k] + below;

    // R <- (I - 2vv^T/|v|^2) R
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t i = k; i < n; ++i) dot += v[i] * r(i, j);
      const double f = 2.0 * dot / vnorm2;
      for (std::size_t i = k; i < n; ++i) r(i, j) -= f * v[i];
    }
    // Q <- Q (I - 2vv^T/|v|^2)
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = k; j < n; ++j) dot += q(i, j) * v[j];
      const double f = 2.0 * dot / vnorm2;
      for (std::size_t j = k; j < n; ++j) q(i, j) -= f * v[j];
    }
    for (std::size_t i = k + 1; i < n; ++i) r(i, k) = 0.0;
  }

  for (std::size_t k = 0; k < n; ++k) {
    if (!(std::abs(r(k, k)) > tol))
      throw SingularInput(k, "matrix is rank-deficient: column " + std::to_string(k) +
                                 " collapsed during QR");
    if (r(k, k) < 0)
      for (std::size_t i = 0; i < n; ++i) q(i, k) = -q(i, k);
  }
  return q;
}

inline constexpr double kOrthonormalCheck = 1e-8;

// Left-multiplies every spatial channel vector of z by q.
inline LatentTensor apply_transform(const SquareMatrix& q, const LatentTensor& z) {
  const auto& shape = z.shape();
  if (q.dim() != shape.channels)
    throw ShapeMismatch("transform is " + std::to_string(q.dim()) + "x" +
                        std::to_string(q.dim()) + " but latent has " +
                        std::to_string(shape.channels) + " channels");
  if (orthonormality_error(q) > kOrthonormalCheck)
    throw InvalidValue("transform is not orthonormal");

  const std::size_t c = shape.channels;
  const std::size_t hw = shape.spatial();
  const auto in = z.values();
  std::vector<double> out(in.size());
  for (std::size_t p = 0; p < hw; ++p)
    for (std::size_t row = 0; row < c; ++row) {
      double acc = q(row, 0) * in[p];
      for (std::size_t col = 1; col < c; ++col) acc += q(row, col) * in[col * hw + p];
      out[row * hw + p] = acc;
    }
  return LatentTensor(shape, std::move(out));
}

// ---------------------------------------------------------------------------

enum class GenomeKind { DirectNoise, ChannelTransform };

inline std::string to_string(GenomeKind k) {
  return k == GenomeKind::DirectNoise ? "direct" : "transform";
}

inline GenomeKind genome_kind_from_string(const std::string& s) {
  if (s == "direct") return GenomeKind::DirectNoise;
  if (s == "transform") return GenomeKind::ChannelTransform;
  throw BadConfig("unknown solution space '" + s + "' (expected direct|transform)");
}

/// One candidate: either a latent fed to the generator as-is, or a raw
/// channel matrix A whose orthonormal factor rotates the run's base noise.
class Genome {
 public:
  Genome() = default;

  static Genome direct(std::uint64_t id, LatentTensor z) {
    Genome g;
    g.kind_ = GenomeKind::DirectNoise;
    g.id_ = id;
    g.direct_ = std::move(z);
    return g;
  }

  static Genome transform(std::uint64_t id, SquareMatrix a) {
    Genome g;
    g.kind_ = GenomeKind::ChannelTransform;
    g.id_ = id;
    g.transform_ = std::move(a);
    return g;
  }

  GenomeKind kind() const noexcept { return kind_; }
  std::uint64_t id() const noexcept { return id_; }
  void set_id(std::uint64_t id) noexcept { id_ = id; }

  const LatentTensor& latent() const {
    if (!direct_) throw InvalidValue("genome holds no direct latent");
    return *direct_;
  }
  const SquareMatrix& matrix() const {
    if (!transform_) throw InvalidValue("genome holds no transform");
    return *transform_;
  }

  // Flat view of the searched coordinates (latent entries or matrix entries).
  std::span<const double> coords() const {
    return direct_ ? direct_->values() : transform_->values();
  }
  std::span<double> mutable_coords() {
    return direct_ ? direct_->mutable_values() : transform_->mutable_values();
  }

  // Same kind and shape, new coordinates.
  Genome with_coords(std::uint64_t id, std::vector<double> coords) const {
    if (kind_ == GenomeKind::DirectNoise)
      return direct(id, LatentTensor(direct_->shape(), std::move(coords)));
    return transform(id, SquareMatrix(transform_->dim(), std::move(coords)));
  }

  friend bool operator==(const Genome&, const Genome&) = default;

 private:
  GenomeKind kind_ = GenomeKind::DirectNoise;
  std::uint64_t id_ = 0;
  std::optional<LatentTensor> direct_;
  std::optional<SquareMatrix> transform_;
};

// Fixed reference noise for transform search; drawn once per run.
struct BaseNoise {
  LatentTensor z;
};

inline LatentTensor realize(const Genome& genome, const BaseNoise* base) {
  if (genome.kind() == GenomeKind::DirectNoise) return genome.latent();
  if (base == nullptr) throw InvalidValue("transform genome realized without base noise");
  return apply_transform(qr_orthonormal(genome.matrix()), base->z);
}

inline nlohmann::json genome_to_json(const Genome& g) {
  std::vector<std::uint8_t> bytes;
  if (g.kind() == GenomeKind::DirectNoise) {
    bytes = encode_latent(g.latent());
  } else {
    const auto n = static_cast<std::uint32_t>(g.matrix().dim());
    bytes = encode_container(1, n, n, g.matrix().values());
  }
  return {{"kind", to_string(g.kind())}, {"id", g.id()}, {"data", base64::encode(bytes)}};
}

inline Genome genome_from_json(const nlohmann::json& j) {
  const auto kind = genome_kind_from_string(j.at("kind").get<std::string>());
  const auto id = j.at("id").get<std::uint64_t>();
  const auto bytes = base64::decode(j.at("data").get<std::string>());
  if (kind == GenomeKind::DirectNoise) return Genome::direct(id, decode_latent(bytes));
  auto raw = decode_container(bytes);
  if (raw.channels != 1 || raw.height != raw.width)
    throw FormatError("transform container must be 1 x n x n");
  return Genome::transform(id, SquareMatrix(raw.height, std::move(raw.values)));
}

}  // namespace latent_evo
