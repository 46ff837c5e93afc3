#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "latent_evo/error.hpp"
#include "latent_evo/latent.hpp"
#include "latent_evo/rng.hpp"
#include "latent_evo/solution_space.hpp"

namespace latent_evo {

// What a genome looks like: a full latent, or a channels x channels matrix.
struct GenomeSpace {
  GenomeKind kind = GenomeKind::DirectNoise;
  LatentShape shape{};

  std::size_t dim() const noexcept {
    return kind == GenomeKind::DirectNoise ? shape.size()
                                           : std::size_t{shape.channels} * shape.channels;
  }

  Genome make(std::uint64_t id, std::vector<double> coords) const {
    if (kind == GenomeKind::DirectNoise) return Genome::direct(id, LatentTensor(shape, std::move(coords)));
    return Genome::transform(id, SquareMatrix(shape.channels, std::move(coords)));
  }

  // Coordinates i.i.d. N(0, 1) in either parameterization.
  Genome random(std::uint64_t id, SeededRng& rng) const {
    std::vector<double> coords(dim());
    for (auto& c : coords) c = rng.gaussian();
    return make(id, std::move(coords));
  }

  friend bool operator==(const GenomeSpace&, const GenomeSpace&) = default;
};

/// Rewards for one generation, aligned with the proposed candidates.
/// Higher is better; minimization objectives arrive already negated.
struct FitnessBatch {
  std::vector<std::uint64_t> ids;
  std::vector<double> rewards;

  std::size_t size() const noexcept { return rewards.size(); }
  friend bool operator==(const FitnessBatch&, const FitnessBatch&) = default;
};

namespace detail {

inline void check_batch(const std::vector<Genome>& candidates, const FitnessBatch& fitness) {
  if (fitness.rewards.size() != candidates.size() || fitness.ids.size() != candidates.size())
    throw SizeMismatch("fitness batch has " + std::to_string(fitness.rewards.size()) +
                       " entries for " + std::to_string(candidates.size()) + " candidates");
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (fitness.ids[i] != candidates[i].id())
      throw SizeMismatch("fitness batch ids are not aligned with candidates");
    if (!std::isfinite(fitness.rewards[i])) throw InvalidValue("non-finite reward");
  }
}

}  // namespace detail

inline nlohmann::json to_json(const GenomeSpace& s) {
  return {{"kind", to_string(s.kind)}, {"shape", {s.shape.channels, s.shape.height, s.shape.width}}};
}

inline GenomeSpace genome_space_from_json(const nlohmann::json& j) {
  GenomeSpace s;
  s.kind = genome_kind_from_string(j.at("kind").get<std::string>());
  const auto& sh = j.at("shape");
  s.shape = {sh.at(0).get<std::uint32_t>(), sh.at(1).get<std::uint32_t>(), sh.at(2).get<std::uint32_t>()};
  return s;
}

}  // namespace latent_evo
