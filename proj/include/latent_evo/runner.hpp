#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "latent_evo/baselines.hpp"
#include "latent_evo/config.hpp"
#include "latent_evo/cosyne.hpp"
#include "latent_evo/es.hpp"
#include "latent_evo/evaluate.hpp"
#include "latent_evo/generator.hpp"
#include "latent_evo/report.hpp"
#include "latent_evo/reward.hpp"

namespace latent_evo {

inline std::unique_ptr<Generator> make_generator(const GeneratorSpec& spec, const LatentShape& shape) {
  if (spec.kind == GeneratorKind::ToyDecoder)
    return std::make_unique<ToyDecoder>(shape, spec.width, spec.height, spec.decoder_seed);
  return std::make_unique<SubprocessGenerator>(shape, spec.width, spec.height, spec.command,
                                               std::chrono::milliseconds(spec.timeout_ms));
}

inline LatentTensor sphere_target(const RewardSpec& spec, const LatentShape& shape) {
  return sample_standard_gaussian(shape, SeededRng(spec.sphere_target_seed, streams::kSphereTarget));
}

inline std::unique_ptr<Reward> make_reward(const RewardSpec& spec, const LatentShape& shape) {
  const Direction dir = spec.resolved_direction();
  switch (spec.kind) {
    case RewardKind::JpegSize: return std::make_unique<JpegSizeReward>(spec.jpeg_quality, dir);
    case RewardKind::TargetMean: return std::make_unique<TargetMeanReward>(spec.target, dir);
    case RewardKind::Smoothness: return std::make_unique<SmoothnessReward>(dir);
    case RewardKind::SphereProxy:
      return std::make_unique<SphereProxyReward>(sphere_target(spec, shape), dir);
  }
  throw ConfigError("unknown reward kind");
}

// Stream for run (instance, seed); every algorithm derives its draws from it.
inline SeededRng run_rng(std::uint64_t seed, std::size_t instance) {
  return SeededRng(seed, mix64(streams::kInstance, instance));
}

namespace detail {

inline std::string run_dir_name(const Instance& inst, std::uint64_t seed) {
  return inst.name + "-seed" + std::to_string(seed);
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

// Accumulates one run's records while the loop progresses.
class RunTracker {
 public:
  RunTracker(RunRecord& record, const Reward& reward, const BaseNoise* base, BudgetLedger& ledger)
      : record_(record), reward_(reward), base_(base), ledger_(ledger) {}

  // `fitness` is oriented; the stats are reported in the reward's natural units.
  void step(const std::vector<Genome>& set, const std::vector<double>& fitness, double ms) {
    std::vector<double> raw(fitness.size());
    bool improved = false;
    for (std::size_t i = 0; i < fitness.size(); ++i) {
      raw[i] = reward_.oriented(fitness[i]);
      if (!best_ || fitness[i] > best_fitness_) {
        best_ = set[i];
        best_fitness_ = fitness[i];
        improved = true;
      }
    }
    if (improved) record_.best_latent = realize(*best_, base_);
    const auto s = summarize(raw, reward_.direction());
    StepStats st;
    st.step = record_.steps.size() + 1;
    st.best = s.best;
    st.mean = s.mean;
    st.median = s.median;
    st.std = s.std;
    st.best_so_far = reward_.oriented(best_fitness_);
    st.evaluations = ledger_.reward_evaluations();
    st.generator_calls = ledger_.generator_calls();
    st.ms = ms;
    ledger_.record_step_ms(ms);
    record_.steps.push_back(st);
    record_.best_genome = *best_;
    record_.best_reward = st.best_so_far;
    record_.evaluations = st.evaluations;
    record_.generator_calls = st.generator_calls;
  }

 private:
  RunRecord& record_;
  const Reward& reward_;
  const BaseNoise* base_;
  BudgetLedger& ledger_;
  std::optional<Genome> best_;
  double best_fitness_ = 0.0;
};

inline void run_cosyne(const RunConfig& c, const GenomeSpace& space, const SeededRng& rng,
                       const BaseNoise* base, const Generator* gen, const Reward& reward,
                       BudgetLedger& ledger, RunTracker& track, nlohmann::json& snapshot) {
  GaState state = ga_init(c.population, space, c.engine.ga, rng.substream(streams::kInitialPopulation));
  const std::size_t b = c.batch_size();
  for (std::size_t t = 1; t <= c.steps; ++t) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<Genome> set;
    std::vector<double> fitness;
    if (state.fresh()) {
      // Step 1 scores the initial members, then their offspring; the union is one step.
      auto initial = ga_propose(state, rng.substream(streams::kPropose, t));
      auto eval = batch_evaluate(initial.candidates, base, gen, reward, b, ledger);
      state = ga_update(state, initial.candidates, eval.fitness);
    }
    auto prop = ga_propose(state, rng.substream(streams::kPropose, t));
    const std::vector<Genome> fresh_part(prop.candidates.begin() + static_cast<std::ptrdiff_t>(prop.reuse_count),
                                         prop.candidates.end());
    auto eval = batch_evaluate(fresh_part, base, gen, reward, b, ledger);
    FitnessBatch all;
    for (std::size_t i = 0; i < prop.reuse_count; ++i) {
      all.ids.push_back(prop.candidates[i].id());
      all.rewards.push_back(prop.reused_fitness[i]);
    }
    all.ids.insert(all.ids.end(), eval.fitness.ids.begin(), eval.fitness.ids.end());
    all.rewards.insert(all.rewards.end(), eval.fitness.rewards.begin(), eval.fitness.rewards.end());
    state = ga_update(state, prop.candidates, all);
    set = std::move(prop.candidates);
    fitness = std::move(all.rewards);
    track.step(set, fitness, elapsed_ms(start));
  }
  snapshot = to_json(state);
}

inline void run_es(const RunConfig& c, const GenomeSpace& space, const SeededRng& rng,
                   const BaseNoise* base, const Generator* gen, const Reward& reward,
                   BudgetLedger& ledger, RunTracker& track, nlohmann::json& snapshot) {
  const bool snes = c.algorithm == Algorithm::Snes;
  const EsRates rates{c.engine.learn_rate_mu, c.engine.learn_rate_sigma};
  EsState state = snes ? snes_init(space, c.engine.sigma0, rng.substream(streams::kEsInit), rates)
                       : pgpe_init(space, c.engine.sigma0, rng.substream(streams::kEsInit), rates);
  for (std::size_t t = 1; t <= c.steps; ++t) {
    const auto start = std::chrono::steady_clock::now();
    const auto step_rng = rng.substream(streams::kPropose, t);
    auto prop = snes ? snes_propose(state, c.population, step_rng)
                     : pgpe_propose(state, c.population, step_rng);
    auto eval = batch_evaluate(prop.candidates, base, gen, reward, c.batch_size(), ledger);
    state = snes ? snes_update(state, prop, eval.fitness) : pgpe_update(state, prop, eval.fitness);
    track.step(prop.candidates, eval.fitness.rewards, elapsed_ms(start));
  }
  snapshot = to_json(state, to_string(c.algorithm));
}

inline void run_best_of_n(const RunConfig& c, const SeededRng& rng, const Generator* gen,
                          const Reward& reward, BudgetLedger& ledger, RunTracker& track,
                          nlohmann::json& snapshot) {
  // N = steps * population, drawn in per-step slices so the curve is comparable.
  for (std::size_t t = 1; t <= c.steps; ++t) {
    const auto start = std::chrono::steady_clock::now();
    const auto set = best_of_n_samples(c.latent_shape, rng, (t - 1) * c.population, c.population);
    auto eval = batch_evaluate(set, nullptr, gen, reward, c.batch_size(), ledger);
    track.step(set, eval.fitness.rewards, elapsed_ms(start));
  }
  snapshot = {{"engine", "best_of_n"}, {"n", c.steps * c.population}};
}

inline void run_zero_order(const RunConfig& c, const SeededRng& rng, const Generator* gen,
                           const Reward& reward, BudgetLedger& ledger, RunTracker& track,
                           nlohmann::json& snapshot) {
  std::optional<ZoState> state;
  for (std::size_t t = 1; t <= c.steps; ++t) {
    const auto start = std::chrono::steady_clock::now();
    ZoStep step = state ? zero_order_step(*state, c.population, rng.substream(streams::kZeroOrderStep, t),
                                          gen, reward, c.batch_size(), ledger)
                        : zero_order_init(c.latent_shape, c.population, c.engine.zo_lambda, rng, gen,
                                          reward, c.batch_size(), ledger);
    state = step.state;
    track.step(step.candidates, step.eval.fitness.rewards, elapsed_ms(start));
  }
  snapshot = {{"engine", "zero_order"},
              {"pivot", base64::encode(encode_latent(state->pivot))},
              {"pivot_reward", state->pivot_raw},
              {"pivot_id", state->pivot_id},
              {"lambda", state->lambda},
              {"next_id", state->next_id}};
}

}  // namespace detail

/// Runs every (instance, seed) pair of the config and returns the report.
/// With a non-empty output_dir the report, step curves, best images and
/// engine snapshots are written there; a failing run still leaves a report
/// with status "aborted" holding everything finished before the error.
inline RunReport run_alignment(const RunConfig& config) {
  validate(config);
  namespace fs = std::filesystem;
  const bool write = !config.output_dir.empty();
  const fs::path root(config.output_dir);
  if (write) {
    std::error_code ec;
    fs::create_directories(root / "runs", ec);
    if (ec) throw IoError("cannot create output directory '" + root.string() + "': " + ec.message());
  }

  const auto instances = resolve_instances(config);
  RunReport report;
  report.config = config;
  {
    const auto probe = make_reward(instances.front().reward, config.latent_shape);
    report.reward_name = probe->name();
    report.direction = probe->direction();
  }

  auto flush = [&] {
    report.aggregate = compute_aggregate(report.runs);
    if (!write) return;
    detail::write_text(root / "report.json", to_json(report).dump(2) + "\n");
    if (report.runs.empty()) return;
    // Step curve averaged over runs; per-run curves live under runs/.
    std::vector<StepStats> avg = report.runs.front().steps;
    for (auto& s : avg) s.best = s.mean = s.median = s.std = s.best_so_far = s.ms = 0.0;
    std::size_t used = 0;
    for (const auto& r : report.runs) {
      if (r.steps.size() != avg.size()) continue;
      ++used;
      for (std::size_t i = 0; i < avg.size(); ++i) {
        avg[i].best += r.steps[i].best;
        avg[i].mean += r.steps[i].mean;
        avg[i].median += r.steps[i].median;
        avg[i].std += r.steps[i].std;
        avg[i].best_so_far += r.steps[i].best_so_far;
        avg[i].ms += r.steps[i].ms;
      }
    }
    for (auto& s : avg) {
      const double n = static_cast<double>(used);
      s.best /= n;
      s.mean /= n;
      s.median /= n;
      s.std /= n;
      s.best_so_far /= n;
      s.ms /= n;
    }
    detail::write_text(root / "steps.csv", steps_csv(avg));
  };

  std::size_t overall_best = 0;
  try {
    for (const auto& inst : instances) {
      const auto generator = make_generator(inst.generator, config.latent_shape);
      const auto reward = make_reward(inst.reward, config.latent_shape);
      for (const std::uint64_t seed : config.seeds) {
        const auto started = std::chrono::steady_clock::now();
        const SeededRng rng = run_rng(seed, inst.index);
        const GenomeSpace space{config.solution_space, config.latent_shape};
        std::optional<BaseNoise> base;
        if (config.solution_space == GenomeKind::ChannelTransform)
          base = BaseNoise{sample_standard_gaussian(config.latent_shape, rng.substream(streams::kBaseNoise))};
        const BaseNoise* base_ptr = base ? &*base : nullptr;

        report.runs.emplace_back();
        RunRecord& rec = report.runs.back();
        rec.instance = inst.index;
        rec.instance_name = inst.name;
        rec.seed = seed;
        BudgetLedger ledger;
        detail::RunTracker track(rec, *reward, base_ptr, ledger);
        nlohmann::json snapshot;
        switch (config.algorithm) {
          case Algorithm::Cosyne:
            detail::run_cosyne(config, space, rng, base_ptr, generator.get(), *reward, ledger, track, snapshot);
            break;
          case Algorithm::Snes:
          case Algorithm::Pgpe:
            detail::run_es(config, space, rng, base_ptr, generator.get(), *reward, ledger, track, snapshot);
            break;
          case Algorithm::BestOfN:
            detail::run_best_of_n(config, rng, generator.get(), *reward, ledger, track, snapshot);
            break;
          case Algorithm::ZeroOrder:
            detail::run_zero_order(config, rng, generator.get(), *reward, ledger, track, snapshot);
            break;
        }
        rec.wall_ms = detail::elapsed_ms(started);
        if (better(rec.best_reward, report.runs[overall_best].best_reward, report.direction))
          overall_best = report.runs.size() - 1;

        if (write) {
          const fs::path dir = root / "runs" / detail::run_dir_name(inst, seed);
          fs::create_directories(dir);
          if (base) snapshot["base_noise"] = base64::encode(encode_latent(base->z));
          detail::write_text(dir / "state.json", snapshot.dump(2) + "\n");
          detail::write_text(dir / "steps.csv", steps_csv(rec.steps));
          // Not charged to the ledger.
          write_ppm_file((dir / "best.ppm").string(), generator->generate(rec.best_latent));
          rec.best_image = (fs::path("runs") / detail::run_dir_name(inst, seed) / "best.ppm").string();
        }
      }
    }
  } catch (const std::exception& e) {
    if (!report.runs.empty() && report.runs.back().steps.empty()) report.runs.pop_back();
    report.status = "aborted";
    report.error = e.what();
    try {
      flush();
    } catch (...) {
    }
    throw;
  }
  flush();
  if (write && !report.runs.empty()) {
    const auto& best = report.runs[overall_best];
    if (!best.best_image.empty()) fs::copy_file(root / best.best_image, root / "best.ppm",
                                                fs::copy_options::overwrite_existing);
  }
  return report;
}

}  // namespace latent_evo
