#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "latent_evo/evaluate.hpp"

namespace latent_evo {

// Sample i of a Best-of-N family; independent of how the family is split into steps.
inline Genome best_of_n_sample(const LatentShape& shape, const SeededRng& rng, std::uint64_t index) {
  return Genome::direct(index, sample_standard_gaussian(shape, rng.substream(streams::kBestOfN, index)));
}

inline std::vector<Genome> best_of_n_samples(const LatentShape& shape, const SeededRng& rng,
                                             std::uint64_t first, std::size_t count) {
  std::vector<Genome> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) out.push_back(best_of_n_sample(shape, rng, first + k));
  return out;
}

struct BestOfNResult {
  LatentTensor best;
  double best_reward = 0.0;       // raw units
  std::size_t best_index = 0;
  std::vector<double> rewards;    // raw units, in draw order
};

/// Draws N i.i.d. standard-normal latents and keeps the best (first drawn on ties).
inline BestOfNResult best_of_n(const Generator* generator, const Reward& reward, std::size_t n,
                               const SeededRng& rng, std::size_t batch_size, BudgetLedger& ledger,
                               const LatentShape& shape) {
  if (n < 1) throw BadConfig("Best-of-N needs N >= 1");
  const auto genomes = best_of_n_samples(shape, rng, 0, n);
  const auto eval = batch_evaluate(genomes, nullptr, generator, reward, batch_size, ledger);
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (eval.fitness.rewards[i] > eval.fitness.rewards[best]) best = i;
  return {genomes[best].latent(), eval.raw[best], best, eval.raw};
}

// ---------------------------------------------------------------------------
// Zero-order hill climbing on the pivot's sphere.

struct ZoState {
  LatentTensor pivot;
  double pivot_reward = 0.0;  // oriented
  double pivot_raw = 0.0;
  double lambda = 0.3;
  std::uint64_t pivot_id = 0;
  std::uint64_t next_id = 0;
};

struct ZoStep {
  ZoState state;
  std::vector<Genome> candidates;
  EvaluationBatch eval;
};

/// First step: P fresh standard-normal latents, the best becomes the pivot.
inline ZoStep zero_order_init(const LatentShape& shape, std::size_t population, double lambda,
                              const SeededRng& rng, const Generator* generator, const Reward& reward,
                              std::size_t batch_size, BudgetLedger& ledger) {
  if (population < 1) throw BadConfig("zero-order population must be >= 1");
  if (!(lambda >= 0) || !std::isfinite(lambda)) throw BadConfig("zero-order lambda must be >= 0");
  ZoStep out;
  const SeededRng init = rng.substream(streams::kZeroOrderInit);
  for (std::size_t i = 0; i < population; ++i)
    out.candidates.push_back(
        Genome::direct(i, sample_standard_gaussian(shape, init.substream(streams::kZeroOrderInit, i))));
  out.eval = batch_evaluate(out.candidates, nullptr, generator, reward, batch_size, ledger);
  std::size_t best = 0;
  for (std::size_t i = 1; i < population; ++i)
    if (out.eval.fitness.rewards[i] > out.eval.fitness.rewards[best]) best = i;
  out.state = {out.candidates[best].latent(), out.eval.fitness.rewards[best], out.eval.raw[best],
               lambda, out.candidates[best].id(), population};
  return out;
}

// c = normalize(pivot + lambda * g) * |pivot|
inline LatentTensor spherical_neighbor(const LatentTensor& pivot, double lambda, SeededRng& rng) {
  const double radius = l2_norm(pivot);
  if (lambda == 0.0 || radius == 0.0) return pivot;
  std::vector<double> v(pivot.values().begin(), pivot.values().end());
  for (auto& x : v) x += lambda * rng.gaussian();
  const double n = l2_norm(v);
  if (n == 0.0) return pivot;
  for (auto& x : v) x *= radius / n;
  return LatentTensor(pivot.shape(), std::move(v));
}

inline ZoStep zero_order_step(const ZoState& state, std::size_t population, SeededRng rng,
                              const Generator* generator, const Reward& reward,
                              std::size_t batch_size, BudgetLedger& ledger) {
  if (population < 1) throw BadConfig("zero-order population must be >= 1");
  ZoStep out;
  out.state = state;
  for (std::size_t i = 0; i < population; ++i)
    out.candidates.push_back(
        Genome::direct(out.state.next_id++, spherical_neighbor(state.pivot, state.lambda, rng)));
  out.eval = batch_evaluate(out.candidates, nullptr, generator, reward, batch_size, ledger);
  std::size_t best = 0;
  for (std::size_t i = 1; i < population; ++i)
    if (out.eval.fitness.rewards[i] > out.eval.fitness.rewards[best]) best = i;
  if (out.eval.fitness.rewards[best] > state.pivot_reward) {
    out.state.pivot = out.candidates[best].latent();
    out.state.pivot_reward = out.eval.fitness.rewards[best];
    out.state.pivot_raw = out.eval.raw[best];
    out.state.pivot_id = out.candidates[best].id();
  }
  return out;
}

}  // namespace latent_evo
