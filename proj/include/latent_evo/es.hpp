#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "latent_evo/engine.hpp"

namespace latent_evo {

/// Separable Gaussian search distribution shared by SNES and PGPE.
struct EsState {
  GenomeSpace space;
  std::vector<double> mu;
  std::vector<double> sigma;
  std::size_t step_count = 0;
  double learn_rate_mu = 1.0;
  double learn_rate_sigma = 0.0;
  double baseline = 0.0;  // PGPE only
  std::uint64_t next_id = 0;

  friend bool operator==(const EsState&, const EsState&) = default;
};

inline constexpr double kPgpeSigmaFloor = 1e-8;

struct EsProposal {
  std::vector<Genome> candidates;
  // SNES: standard-normal draws s_i. PGPE: perturbations eps_i (one per pair).
  std::vector<std::vector<double>> draws;
};

struct EsRates {
  std::optional<double> mu;
  std::optional<double> sigma;
};

namespace detail {

inline EsState es_init(const GenomeSpace& space, double sigma0, SeededRng& rng) {
  if (!(sigma0 > 0) || !std::isfinite(sigma0))
    throw BadConfig("initial sigma must be positive and finite");
  space.shape.validate();
  EsState s;
  s.space = space;
  s.mu.resize(space.dim());
  for (auto& m : s.mu) m = rng.gaussian();
  s.sigma.assign(space.dim(), sigma0);
  return s;
}

inline void check_draws(const EsState& s, const EsProposal& prop, const FitnessBatch& fitness) {
  check_batch(prop.candidates, fitness);
  for (const auto& d : prop.draws)
    if (d.size() != s.mu.size()) throw SizeMismatch("draw length differs from distribution size");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// SNES

inline double snes_default_sigma_rate(std::size_t dim) {
  const double d = static_cast<double>(dim);
  return (3.0 + std::log(d)) / (5.0 * std::sqrt(d));
}

inline EsState snes_init(const GenomeSpace& space, double sigma0, SeededRng rng,
                         EsRates rates = {}) {
  EsState s = detail::es_init(space, sigma0, rng);
  s.learn_rate_mu = rates.mu.value_or(1.0);
  s.learn_rate_sigma = rates.sigma.value_or(snes_default_sigma_rate(space.dim()));
  return s;
}

// Log-rank utilities for ranks 1..n (1 = best), summing to zero.
inline std::vector<double> snes_utilities(std::size_t n) {
  std::vector<double> u(n);
  double total = 0.0;
  const double top = std::log(static_cast<double>(n) / 2.0 + 1.0);
  for (std::size_t k = 1; k <= n; ++k) {
    u[k - 1] = std::max(0.0, top - std::log(static_cast<double>(k)));
    total += u[k - 1];
  }
  for (auto& x : u) x = x / total - 1.0 / static_cast<double>(n);
  return u;
}

inline EsProposal snes_propose(EsState& state, std::size_t population, SeededRng rng) {
  if (population < 4) throw BadConfig("SNES population must be >= 4");
  EsProposal out;
  const std::size_t dim = state.mu.size();
  for (std::size_t i = 0; i < population; ++i) {
    std::vector<double> s(dim), x(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      s[j] = rng.gaussian();
      x[j] = state.mu[j] + state.sigma[j] * s[j];
    }
    out.candidates.push_back(state.space.make(state.next_id++, std::move(x)));
    out.draws.push_back(std::move(s));
  }
  return out;
}

inline EsState snes_update(const EsState& state, const EsProposal& proposal,
                           const FitnessBatch& fitness) {
  detail::check_draws(state, proposal, fitness);
  const std::size_t n = fitness.size();
  if (proposal.draws.size() != n) throw SizeMismatch("draw count differs from fitness count");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return fitness.rewards[a] > fitness.rewards[b];
  });
  const auto util = snes_utilities(n);

  const std::size_t dim = state.mu.size();
  std::vector<double> grad_mu(dim, 0.0), grad_sigma(dim, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& s = proposal.draws[order[r]];
    for (std::size_t j = 0; j < dim; ++j) {
      grad_mu[j] += util[r] * s[j];
      grad_sigma[j] += util[r] * (s[j] * s[j] - 1.0);
    }
  }

  EsState next = state;
  for (std::size_t j = 0; j < dim; ++j) {
    next.mu[j] += state.learn_rate_mu * state.sigma[j] * grad_mu[j];
    next.sigma[j] *= std::exp(0.5 * state.learn_rate_sigma * grad_sigma[j]);
  }
  ++next.step_count;
  return next;
}

// ---------------------------------------------------------------------------
// PGPE

inline EsState pgpe_init(const GenomeSpace& space, double sigma0, SeededRng rng,
                         EsRates rates = {}) {
  EsState s = detail::es_init(space, sigma0, rng);
  s.learn_rate_mu = rates.mu.value_or(0.1);
  s.learn_rate_sigma = rates.sigma.value_or(0.05);
  return s;
}

// Candidates come in symmetric pairs: [mu + eps_0, mu - eps_0, mu + eps_1, ...].
inline EsProposal pgpe_propose(EsState& state, std::size_t population, SeededRng rng) {
  if (population % 2 != 0)
    throw OddPopulation("PGPE needs an even population, got " + std::to_string(population));
  if (population < 4) throw BadConfig("PGPE population must be >= 4");
  EsProposal out;
  const std::size_t dim = state.mu.size();
  for (std::size_t i = 0; i < population / 2; ++i) {
    std::vector<double> eps(dim), plus(dim), minus(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      eps[j] = state.sigma[j] * rng.gaussian();
      plus[j] = state.mu[j] + eps[j];
      minus[j] = state.mu[j] - eps[j];
    }
    out.candidates.push_back(state.space.make(state.next_id++, std::move(plus)));
    out.candidates.push_back(state.space.make(state.next_id++, std::move(minus)));
    out.draws.push_back(std::move(eps));
  }
  return out;
}

// Fractional ranks mapped linearly onto [-0.5, 0.5]; tied rewards share a value.
inline std::vector<double> centered_ranks(const std::vector<double>& rewards) {
  const std::size_t n = rewards.size();
  std::vector<double> out(n, 0.0);
  if (n < 2) return out;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rewards[a] < rewards[b]; });
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && rewards[order[j + 1]] == rewards[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j);
    for (std::size_t k = i; k <= j; ++k)
      out[order[k]] = rank / static_cast<double>(n - 1) - 0.5;
    i = j + 1;
  }
  return out;
}

inline EsState pgpe_update(const EsState& state, const EsProposal& proposal,
                           const FitnessBatch& fitness) {
  detail::check_draws(state, proposal, fitness);
  if (fitness.size() % 2 != 0) throw OddPopulation("PGPE fitness batch has odd size");
  const std::size_t pairs = fitness.size() / 2;
  if (proposal.draws.size() != pairs) throw SizeMismatch("PGPE draw count differs from pair count");

  const auto shaped = centered_ranks(fitness.rewards);
  const std::size_t dim = state.mu.size();
  std::vector<double> grad_mu(dim, 0.0), grad_sigma(dim, 0.0);
  double mean_reward = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const double r_plus = shaped[2 * i];
    const double r_minus = shaped[2 * i + 1];
    const double diff = 0.5 * (r_plus - r_minus);
    const double avg = 0.5 * (r_plus + r_minus) - state.baseline;
    mean_reward += r_plus + r_minus;
    const auto& eps = proposal.draws[i];
    for (std::size_t j = 0; j < dim; ++j) {
      grad_mu[j] += eps[j] * diff;
      const double s = state.sigma[j];
      grad_sigma[j] += avg * (eps[j] * eps[j] - s * s) / s;
    }
  }
  mean_reward /= static_cast<double>(fitness.size());

  EsState next = state;
  const double inv = 1.0 / static_cast<double>(pairs);
  for (std::size_t j = 0; j < dim; ++j) {
    next.mu[j] += state.learn_rate_mu * grad_mu[j] * inv;
    next.sigma[j] = std::max(kPgpeSigmaFloor, state.sigma[j] + state.learn_rate_sigma * grad_sigma[j] * inv);
  }
  next.baseline = 0.9 * state.baseline + 0.1 * mean_reward;
  ++next.step_count;
  return next;
}

// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const EsState& s, const std::string& engine) {
  return {{"engine", engine},
          {"space", to_json(s.space)},
          {"mu", s.mu},
          {"sigma", s.sigma},
          {"step_count", s.step_count},
          {"learn_rate_mu", s.learn_rate_mu},
          {"learn_rate_sigma", s.learn_rate_sigma},
          {"baseline", s.baseline},
          {"next_id", s.next_id}};
}

inline EsState es_state_from_json(const nlohmann::json& j) {
  EsState s;
  s.space = genome_space_from_json(j.at("space"));
  s.mu = j.at("mu").get<std::vector<double>>();
  s.sigma = j.at("sigma").get<std::vector<double>>();
  if (s.mu.size() != s.space.dim() || s.sigma.size() != s.space.dim())
    throw FormatError("ES snapshot vectors do not match the genome space");
  s.step_count = j.at("step_count").get<std::size_t>();
  s.learn_rate_mu = j.at("learn_rate_mu").get<double>();
  s.learn_rate_sigma = j.at("learn_rate_sigma").get<double>();
  s.baseline = j.at("baseline").get<double>();
  s.next_id = j.at("next_id").get<std::uint64_t>();
  return s;
}

}  // namespace latent_evo
