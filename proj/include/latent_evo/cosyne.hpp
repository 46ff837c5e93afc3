#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "latent_evo/engine.hpp"

namespace latent_evo {

struct GaConfig {
  std::size_t tournament_size = 2;
  std::size_t elite_count = 1;
  double mutation_sigma = 0.1;
  double mutation_prob = 0.5;
  double crossover_prob = 1.0;
  double permute_prob = 0.2;

  friend bool operator==(const GaConfig&, const GaConfig&) = default;
};

/// CoSyNE-style population state.
///
/// `fitnesses` is empty until the first evaluation. `members_scored_this_step`
/// is set right after that first evaluation: the members' rewards belong to
/// the current step, so the next proposal leaves them untouched and lets the
/// caller reuse their rewards instead of evaluating them twice.
struct GaState {
  GenomeSpace space;
  GaConfig config;
  std::vector<Genome> population;
  std::vector<double> fitnesses;
  std::uint64_t next_id = 0;
  std::size_t generation = 0;
  bool members_scored_this_step = false;

  bool fresh() const noexcept { return generation == 0; }
  std::size_t size() const noexcept { return population.size(); }

  friend bool operator==(const GaState&, const GaState&) = default;
};

struct GaProposal {
  std::vector<Genome> candidates;
  // Leading candidates whose rewards are already known for this step.
  std::size_t reuse_count = 0;
  std::vector<double> reused_fitness;
};

inline void validate(const GaConfig& c, std::size_t population) {
  if (population < 4 || population % 2 != 0)
    throw BadConfig("GA population must be even and >= 4, got " + std::to_string(population));
  if (c.tournament_size < 2 || c.tournament_size > population)
    throw BadConfig("tournament size must be in [2, population]");
  if (c.elite_count >= population) throw BadConfig("elite count must be below population");
  if (!(c.mutation_sigma > 0)) throw BadConfig("mutation sigma must be positive");
  for (double p : {c.mutation_prob, c.crossover_prob, c.permute_prob})
    if (!(p >= 0.0 && p <= 1.0)) throw BadConfig("GA probabilities must lie in [0, 1]");
}

inline GaState ga_init(std::size_t population, const GenomeSpace& space, const GaConfig& config,
                       SeededRng rng) {
  validate(config, population);
  space.shape.validate();
  GaState s;
  s.space = space;
  s.config = config;
  s.population.reserve(population);
  for (std::size_t i = 0; i < population; ++i) s.population.push_back(space.random(s.next_id++, rng));
  return s;
}

// Child coordinate i comes from `first` with probability p, else from `second`.
inline std::vector<double> uniform_crossover(std::span<const double> first,
                                             std::span<const double> second, double p,
                                             SeededRng& rng) {
  if (first.size() != second.size()) throw ShapeMismatch("crossover parents differ in size");
  std::vector<double> child(first.size());
  for (std::size_t i = 0; i < child.size(); ++i) child[i] = rng.bernoulli(p) ? first[i] : second[i];
  return child;
}

namespace detail {

// Higher fitness wins; equal fitness goes to the lower id.
inline bool ranks_before(double fa, std::uint64_t ida, double fb, std::uint64_t idb) {
  return fa > fb || (fa == fb && ida < idb);
}

inline std::size_t tournament(const GaState& s, SeededRng& rng, std::vector<std::size_t>& scratch) {
  const std::size_t n = s.size();
  scratch.resize(n);
  std::iota(scratch.begin(), scratch.end(), std::size_t{0});
  std::size_t best = n;
  for (std::size_t k = 0; k < s.config.tournament_size; ++k) {
    const std::size_t j = k + static_cast<std::size_t>(rng.below(n - k));
    std::swap(scratch[k], scratch[j]);
    const std::size_t cand = scratch[k];
    if (best == n || ranks_before(s.fitnesses[cand], s.population[cand].id(), s.fitnesses[best],
                                  s.population[best].id()))
      best = cand;
  }
  return best;
}

inline std::vector<std::size_t> ranking(std::span<const double> fitness,
                                        std::span<const Genome> genomes) {
  std::vector<std::size_t> order(fitness.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ranks_before(fitness[a], genomes[a].id(), fitness[b], genomes[b].id());
  });
  return order;
}

}  // namespace detail

/// Builds the extended population: the P current members followed by P/2
/// offspring from tournament selection, uniform crossover and Gaussian
/// mutation, then per-coordinate permutation across the non-elite genomes.
/// On a fresh state the initial population is returned unchanged.
inline GaProposal ga_propose(GaState& state, SeededRng rng) {
  GaProposal out;
  if (state.fresh()) {
    out.candidates = state.population;
    return out;
  }
  if (state.fitnesses.size() != state.population.size())
    throw NotEvaluated("GA population has no fitness for every member");

  const auto& cfg = state.config;
  const std::size_t p = state.size();
  const std::size_t dim = state.space.dim();

  out.candidates = state.population;
  std::vector<std::size_t> scratch;
  for (std::size_t k = 0; k < p / 2; ++k) {
    const auto& first = state.population[detail::tournament(state, rng, scratch)].coords();
    const auto& second = state.population[detail::tournament(state, rng, scratch)].coords();
    std::vector<double> child(first.begin(), first.end());
    if (rng.bernoulli(cfg.crossover_prob)) child = uniform_crossover(first, second, 0.5, rng);
    for (auto& x : child)
      if (rng.bernoulli(cfg.mutation_prob)) x += cfg.mutation_sigma * rng.gaussian();
    out.candidates.push_back(state.space.make(state.next_id++, std::move(child)));
  }

  // Permutation pool: every offspring, plus the non-elite members unless their
  // rewards were just computed for this step.
  std::vector<std::size_t> pool;
  if (!state.members_scored_this_step) {
    const auto order = detail::ranking(state.fitnesses, state.population);
    for (std::size_t r = cfg.elite_count; r < p; ++r) pool.push_back(order[r]);
    std::sort(pool.begin(), pool.end());
  }
  for (std::size_t i = p; i < out.candidates.size(); ++i) pool.push_back(i);

  std::vector<bool> touched(out.candidates.size(), false);
  if (pool.size() > 1) {
    std::vector<double> column(pool.size());
    for (std::size_t j = 0; j < dim; ++j) {
      if (!rng.bernoulli(cfg.permute_prob)) continue;
      for (std::size_t m = 0; m < pool.size(); ++m) column[m] = out.candidates[pool[m]].coords()[j];
      for (std::size_t m = pool.size() - 1; m > 0; --m)
        std::swap(column[m], column[static_cast<std::size_t>(rng.below(m + 1))]);
      for (std::size_t m = 0; m < pool.size(); ++m) {
        auto& slot = out.candidates[pool[m]].mutable_coords()[j];
        if (slot != column[m]) touched[pool[m]] = true;
        slot = column[m];
      }
    }
  }
  // Members whose coordinates changed are new genomes.
  for (std::size_t i = 0; i < p; ++i)
    if (touched[i]) out.candidates[i].set_id(state.next_id++);

  if (state.members_scored_this_step) {
    out.reuse_count = p;
    out.reused_fitness = state.fitnesses;
  }
  return out;
}

/// Keeps the top-P candidates by fitness (lower id wins ties).
inline GaState ga_update(const GaState& state, const std::vector<Genome>& candidates,
                         const FitnessBatch& fitness) {
  detail::check_batch(candidates, fitness);
  const std::size_t p = state.size();
  if (candidates.size() < p) throw SizeMismatch("fewer candidates than population size");

  const auto order = detail::ranking(fitness.rewards, candidates);
  GaState next = state;
  next.population.clear();
  next.fitnesses.clear();
  for (std::size_t r = 0; r < p; ++r) {
    next.population.push_back(candidates[order[r]]);
    next.fitnesses.push_back(fitness.rewards[order[r]]);
  }
  next.members_scored_this_step = state.fresh();
  ++next.generation;
  return next;
}

// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const GaConfig& c) {
  return {{"tournament_size", c.tournament_size}, {"elite_count", c.elite_count},
          {"mutation_sigma", c.mutation_sigma},   {"mutation_prob", c.mutation_prob},
          {"crossover_prob", c.crossover_prob},   {"permute_prob", c.permute_prob}};
}

inline GaConfig ga_config_from_json(const nlohmann::json& j) {
  GaConfig c;
  c.tournament_size = j.at("tournament_size").get<std::size_t>();
  c.elite_count = j.at("elite_count").get<std::size_t>();
  c.mutation_sigma = j.at("mutation_sigma").get<double>();
  c.mutation_prob = j.at("mutation_prob").get<double>();
  c.crossover_prob = j.at("crossover_prob").get<double>();
  c.permute_prob = j.at("permute_prob").get<double>();
  return c;
}

inline nlohmann::json to_json(const GaState& s) {
  nlohmann::json pop = nlohmann::json::array();
  for (const auto& g : s.population) pop.push_back(genome_to_json(g));
  return {{"engine", "cosyne"},
          {"space", to_json(s.space)},
          {"config", to_json(s.config)},
          {"population", pop},
          {"fitnesses", s.fitnesses},
          {"next_id", s.next_id},
          {"generation", s.generation},
          {"members_scored_this_step", s.members_scored_this_step}};
}

inline GaState ga_state_from_json(const nlohmann::json& j) {
  if (j.at("engine") != "cosyne") throw FormatError("snapshot is not a cosyne state");
  GaState s;
  s.space = genome_space_from_json(j.at("space"));
  s.config = ga_config_from_json(j.at("config"));
  for (const auto& g : j.at("population")) s.population.push_back(genome_from_json(g));
  s.fitnesses = j.at("fitnesses").get<std::vector<double>>();
  s.next_id = j.at("next_id").get<std::uint64_t>();
  s.generation = j.at("generation").get<std::size_t>();
  s.members_scored_this_step = j.at("members_scored_this_step").get<bool>();
  return s;
}

}  // namespace latent_evo
