#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "latent_evo/cosyne.hpp"
#include "latent_evo/error.hpp"
#include "latent_evo/latent.hpp"
#include "latent_evo/reward.hpp"
#include "latent_evo/rng.hpp"
#include "latent_evo/solution_space.hpp"

namespace latent_evo {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr std::size_t kShortHorizon = 15;
inline constexpr std::size_t kLongHorizon = 50;

enum class Algorithm { Cosyne, Snes, Pgpe, BestOfN, ZeroOrder };

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Cosyne: return "cosyne";
    case Algorithm::Snes: return "snes";
    case Algorithm::Pgpe: return "pgpe";
    case Algorithm::BestOfN: return "best_of_n";
    case Algorithm::ZeroOrder: return "zero_order";
  }
  return "?";
}

inline Algorithm algorithm_from_string(const std::string& s) {
  for (auto a : {Algorithm::Cosyne, Algorithm::Snes, Algorithm::Pgpe, Algorithm::BestOfN,
                 Algorithm::ZeroOrder})
    if (to_string(a) == s) return a;
  throw ConfigError("unknown algorithm '" + s + "' (expected cosyne|snes|pgpe|best_of_n|zero_order)");
}

inline bool is_population_engine(Algorithm a) {
  return a == Algorithm::Cosyne || a == Algorithm::Snes || a == Algorithm::Pgpe;
}

enum class GeneratorKind { ToyDecoder, Subprocess };

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::ToyDecoder;
  std::uint32_t width = 64;
  std::uint32_t height = 64;
  std::uint64_t decoder_seed = 0;
  std::vector<std::string> command;
  std::uint64_t timeout_ms = 30000;

  friend bool operator==(const GeneratorSpec&, const GeneratorSpec&) = default;
};

enum class RewardKind { JpegSize, TargetMean, Smoothness, SphereProxy };

inline std::string to_string(RewardKind k) {
  switch (k) {
    case RewardKind::JpegSize: return "jpeg_size";
    case RewardKind::TargetMean: return "target_mean";
    case RewardKind::Smoothness: return "smoothness";
    case RewardKind::SphereProxy: return "sphere_proxy";
  }
  return "?";
}

inline RewardKind reward_kind_from_string(const std::string& s) {
  for (auto k : {RewardKind::JpegSize, RewardKind::TargetMean, RewardKind::Smoothness,
                 RewardKind::SphereProxy})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown reward '" + s + "'");
}

struct RewardSpec {
  RewardKind kind = RewardKind::TargetMean;
  std::optional<Direction> direction;  // defaults per kind
  int jpeg_quality = kDefaultJpegQuality;
  std::array<double, 3> target{128.0, 128.0, 128.0};
  std::uint64_t sphere_target_seed = 0;

  Direction resolved_direction() const {
    if (direction) return *direction;
    return kind == RewardKind::JpegSize ? Direction::Minimize : Direction::Maximize;
  }

  friend bool operator==(const RewardSpec&, const RewardSpec&) = default;
};

struct EngineParams {
  GaConfig ga{};
  double sigma0 = 0.1;
  std::optional<double> learn_rate_mu;
  std::optional<double> learn_rate_sigma;
  double zo_lambda = 0.3;

  friend bool operator==(const EngineParams&, const EngineParams&) = default;
};

/// Named experiment instances: each binds its own decoder seed and reward
/// parameters. count == 0 means a single instance using the literal specs.
struct InstanceSpec {
  std::size_t count = 0;
  std::uint64_t seed = 0;
  double target_spread = 12.0;

  friend bool operator==(const InstanceSpec&, const InstanceSpec&) = default;
};

struct RunConfig {
  Algorithm algorithm = Algorithm::Cosyne;
  GenomeKind solution_space = GenomeKind::DirectNoise;
  std::size_t population = 16;
  std::optional<std::size_t> batch;
  std::size_t steps = kShortHorizon;
  std::vector<std::uint64_t> seeds{0};
  LatentShape latent_shape{4, 4, 4};
  GeneratorSpec generator{};
  RewardSpec reward{};
  EngineParams engine{};
  InstanceSpec instances{};
  std::string output_dir = "out";

  // Candidates evaluated per step (CoSyNE adds P/2 offspring to the P members).
  std::size_t extended_population() const {
    return algorithm == Algorithm::Cosyne ? population + population / 2 : population;
  }
  std::size_t batch_size() const { return batch.value_or(extended_population()); }

  // Closed-form reward evaluations for one run.
  std::uint64_t expected_evaluations() const { return std::uint64_t{steps} * extended_population(); }

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// One resolved experiment instance.
struct Instance {
  std::size_t index = 0;
  std::string name;
  GeneratorSpec generator;
  RewardSpec reward;
};

inline std::vector<Instance> resolve_instances(const RunConfig& c) {
  std::vector<Instance> out;
  if (c.instances.count == 0) {
    out.push_back({0, "default", c.generator, c.reward});
    return out;
  }
  for (std::size_t k = 0; k < c.instances.count; ++k) {
    SeededRng rng = SeededRng(c.instances.seed, streams::kInstance).substream(streams::kInstance, k);
    Instance inst{k, "instance-" + std::to_string(k), c.generator, c.reward};
    inst.generator.decoder_seed = rng.next_u64();
    for (auto& t : inst.reward.target) t = 128.0 + c.instances.target_spread * (2.0 * rng.uniform() - 1.0);
    inst.reward.sphere_target_seed = rng.next_u64();
    out.push_back(std::move(inst));
  }
  return out;
}

inline void validate(const RunConfig& c) {
  c.latent_shape.validate();
  if (c.steps < 1) throw ConfigError("steps must be >= 1");
  if (c.seeds.empty()) throw ConfigError("at least one seed is required");
  switch (c.algorithm) {
    case Algorithm::Cosyne:
      validate(c.engine.ga, c.population);
      break;
    case Algorithm::Snes:
      if (c.population < 4) throw ConfigError("snes population must be >= 4");
      break;
    case Algorithm::Pgpe:
      if (c.population < 4 || c.population % 2 != 0)
        throw ConfigError("pgpe population must be even and >= 4");
      break;
    case Algorithm::BestOfN:
    case Algorithm::ZeroOrder:
      if (c.population < 1) throw ConfigError("population must be >= 1");
      if (c.solution_space != GenomeKind::DirectNoise)
        throw ConfigError(to_string(c.algorithm) + " searches latents directly; use solution_space=direct");
      break;
  }
  if ((c.algorithm == Algorithm::Snes || c.algorithm == Algorithm::Pgpe) && !(c.engine.sigma0 > 0))
    throw ConfigError("sigma0 must be positive");
  if (c.solution_space == GenomeKind::ChannelTransform && c.latent_shape.channels < 2)
    throw ConfigError("transform search needs at least 2 channels");
  if (c.batch && (*c.batch < 1 || *c.batch > c.extended_population()))
    throw ConfigError("batch must lie in [1, " + std::to_string(c.extended_population()) + "]");
  if (!(c.engine.zo_lambda >= 0)) throw ConfigError("zo_lambda must be >= 0");
  const bool image_reward = c.reward.kind != RewardKind::SphereProxy;
  if (image_reward && c.generator.kind == GeneratorKind::Subprocess && c.generator.command.empty())
    throw ConfigError("subprocess generator needs a command");
  if (c.generator.width < 1 || c.generator.height < 1)
    throw ConfigError("generator resolution must be positive");
  if (c.reward.jpeg_quality < 1 || c.reward.jpeg_quality > 100)
    throw ConfigError("jpeg_quality must be in [1, 100]");
}

// ---------------------------------------------------------------------------
// JSON schema (version 1). Unknown keys are rejected at every level.

namespace detail {

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                           const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items())
    if (!ok.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

template <typename T>
T field(const nlohmann::json& j, const char* key, const T& fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("bad value for '" + std::string(key) + "' in " + where);
  }
}

template <typename T>
std::optional<T> optional_field(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return field<T>(j, key, T{}, where);
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
  using detail::field;
  detail::reject_unknown(j,
                         {"schema_version", "algorithm", "solution_space", "population", "batch",
                          "steps", "seeds", "latent_shape", "generator", "reward", "engine",
                          "instances", "output_dir"},
                         "config");
  const int version = field<int>(j, "schema_version", -1, "config");
  if (version != kConfigSchemaVersion)
    throw ConfigError("config schema_version must be " + std::to_string(kConfigSchemaVersion));
  if (!j.contains("algorithm")) throw ConfigError("config is missing 'algorithm'");

  RunConfig c;
  c.algorithm = algorithm_from_string(field<std::string>(j, "algorithm", "", "config"));
  c.solution_space = [&] {
    try {
      return genome_kind_from_string(field<std::string>(j, "solution_space", "direct", "config"));
    } catch (const BadConfig& e) {
      throw ConfigError(e.what());
    }
  }();
  c.population = field<std::size_t>(j, "population", c.population, "config");
  c.batch = detail::optional_field<std::size_t>(j, "batch", "config");
  if (j.contains("steps")) {
    const auto& s = j.at("steps");
    if (s == "short") c.steps = kShortHorizon;
    else if (s == "long") c.steps = kLongHorizon;
    else c.steps = field<std::size_t>(j, "steps", c.steps, "config");
  }
  c.seeds = field<std::vector<std::uint64_t>>(j, "seeds", c.seeds, "config");
  if (j.contains("latent_shape")) {
    const auto v = field<std::vector<std::uint32_t>>(j, "latent_shape", {}, "config");
    if (v.size() != 3) throw ConfigError("latent_shape must be [channels, height, width]");
    c.latent_shape = {v[0], v[1], v[2]};
  }
  if (j.contains("generator")) {
    const auto& g = j.at("generator");
    detail::reject_unknown(g, {"kind", "width", "height", "seed", "command", "timeout_ms"}, "generator");
    const auto kind = field<std::string>(g, "kind", "toy_decoder", "generator");
    if (kind == "toy_decoder") c.generator.kind = GeneratorKind::ToyDecoder;
    else if (kind == "subprocess") c.generator.kind = GeneratorKind::Subprocess;
    else throw ConfigError("unknown generator kind '" + kind + "'");
    c.generator.width = field<std::uint32_t>(g, "width", c.generator.width, "generator");
    c.generator.height = field<std::uint32_t>(g, "height", c.generator.height, "generator");
    c.generator.decoder_seed = field<std::uint64_t>(g, "seed", c.generator.decoder_seed, "generator");
    c.generator.command = field<std::vector<std::string>>(g, "command", {}, "generator");
    c.generator.timeout_ms = field<std::uint64_t>(g, "timeout_ms", c.generator.timeout_ms, "generator");
  }
  if (j.contains("reward")) {
    const auto& r = j.at("reward");
    detail::reject_unknown(r, {"kind", "direction", "quality", "target", "target_seed"}, "reward");
    c.reward.kind = reward_kind_from_string(field<std::string>(r, "kind", "target_mean", "reward"));
    if (auto d = detail::optional_field<std::string>(r, "direction", "reward")) {
      try {
        c.reward.direction = direction_from_string(*d);
      } catch (const BadConfig& e) {
        throw ConfigError(e.what());
      }
    }
    c.reward.jpeg_quality = field<int>(r, "quality", c.reward.jpeg_quality, "reward");
    if (r.contains("target")) {
      const auto t = field<std::vector<double>>(r, "target", {}, "reward");
      if (t.size() != 3) throw ConfigError("reward.target must have 3 entries");
      c.reward.target = {t[0], t[1], t[2]};
    }
    c.reward.sphere_target_seed = field<std::uint64_t>(r, "target_seed", 0, "reward");
  }
  if (j.contains("engine")) {
    const auto& e = j.at("engine");
    detail::reject_unknown(e,
                           {"tournament_size", "elite_count", "mutation_sigma", "mutation_prob",
                            "crossover_prob", "permute_prob", "sigma0", "learn_rate_mu",
                            "learn_rate_sigma", "zo_lambda"},
                           "engine");
    auto& ga = c.engine.ga;
    ga.tournament_size = field<std::size_t>(e, "tournament_size", ga.tournament_size, "engine");
    ga.elite_count = field<std::size_t>(e, "elite_count", ga.elite_count, "engine");
    ga.mutation_sigma = field<double>(e, "mutation_sigma", ga.mutation_sigma, "engine");
    ga.mutation_prob = field<double>(e, "mutation_prob", ga.mutation_prob, "engine");
    ga.crossover_prob = field<double>(e, "crossover_prob", ga.crossover_prob, "engine");
    ga.permute_prob = field<double>(e, "permute_prob", ga.permute_prob, "engine");
    c.engine.sigma0 = field<double>(e, "sigma0", c.engine.sigma0, "engine");
    c.engine.learn_rate_mu = detail::optional_field<double>(e, "learn_rate_mu", "engine");
    c.engine.learn_rate_sigma = detail::optional_field<double>(e, "learn_rate_sigma", "engine");
    c.engine.zo_lambda = field<double>(e, "zo_lambda", c.engine.zo_lambda, "engine");
  }
  if (j.contains("instances")) {
    const auto& i = j.at("instances");
    detail::reject_unknown(i, {"count", "seed", "target_spread"}, "instances");
    c.instances.count = field<std::size_t>(i, "count", 60, "instances");
    c.instances.seed = field<std::uint64_t>(i, "seed", 0, "instances");
    c.instances.target_spread = field<double>(i, "target_spread", c.instances.target_spread, "instances");
  }
  c.output_dir = field<std::string>(j, "output_dir", c.output_dir, "config");
  return c;
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["algorithm"] = to_string(c.algorithm);
  j["solution_space"] = to_string(c.solution_space);
  j["population"] = c.population;
  j["batch"] = c.batch ? nlohmann::json(*c.batch) : nlohmann::json(nullptr);
  j["steps"] = c.steps;
  j["seeds"] = c.seeds;
  j["latent_shape"] = {c.latent_shape.channels, c.latent_shape.height, c.latent_shape.width};
  j["generator"] = {{"kind", c.generator.kind == GeneratorKind::ToyDecoder ? "toy_decoder" : "subprocess"},
                    {"width", c.generator.width},
                    {"height", c.generator.height},
                    {"seed", c.generator.decoder_seed},
                    {"command", c.generator.command},
                    {"timeout_ms", c.generator.timeout_ms}};
  j["reward"] = {{"kind", to_string(c.reward.kind)},
                 {"direction", c.reward.direction ? nlohmann::json(to_string(*c.reward.direction))
                                                  : nlohmann::json(nullptr)},
                 {"quality", c.reward.jpeg_quality},
                 {"target", c.reward.target},
                 {"target_seed", c.reward.sphere_target_seed}};
  const auto& ga = c.engine.ga;
  j["engine"] = {{"tournament_size", ga.tournament_size},
                 {"elite_count", ga.elite_count},
                 {"mutation_sigma", ga.mutation_sigma},
                 {"mutation_prob", ga.mutation_prob},
                 {"crossover_prob", ga.crossover_prob},
                 {"permute_prob", ga.permute_prob},
                 {"sigma0", c.engine.sigma0},
                 {"learn_rate_mu", c.engine.learn_rate_mu ? nlohmann::json(*c.engine.learn_rate_mu)
                                                          : nlohmann::json(nullptr)},
                 {"learn_rate_sigma", c.engine.learn_rate_sigma
                                          ? nlohmann::json(*c.engine.learn_rate_sigma)
                                          : nlohmann::json(nullptr)},
                 {"zo_lambda", c.engine.zo_lambda}};
  if (c.instances.count > 0)
    j["instances"] = {{"count", c.instances.count},
                      {"seed", c.instances.seed},
                      {"target_spread", c.instances.target_spread}};
  j["output_dir"] = c.output_dir;
  return j;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

}  // namespace latent_evo
