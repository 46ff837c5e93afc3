#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "latent_evo/base64.hpp"
#include "latent_evo/config.hpp"
#include "latent_evo/error.hpp"
#include "latent_evo/solution_space.hpp"

namespace latent_evo {

/// Summary of one step's evaluated set, in the reward's natural units.
/// `best` respects the reward direction (max when maximizing, min otherwise).
struct StepStats {
  std::size_t step = 0;
  double best = 0.0;
  double mean = 0.0;
  double median = 0.0;
  double std = 0.0;
  double best_so_far = 0.0;
  std::uint64_t evaluations = 0;      // cumulative reward evaluations
  std::uint64_t generator_calls = 0;  // cumulative
  double ms = 0.0;

  friend bool operator==(const StepStats&, const StepStats&) = default;
};

struct SetSummary {
  double best = 0.0;
  double mean = 0.0;
  double median = 0.0;
  double std = 0.0;
};

// Population std (divide by n); median of an even-sized set is the lower middle.
inline SetSummary summarize(std::vector<double> values, Direction dir) {
  if (values.empty()) throw SizeMismatch("cannot summarize an empty set");
  SetSummary s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / n);
  std::sort(values.begin(), values.end());
  s.median = values[(values.size() - 1) / 2];
  s.best = dir == Direction::Maximize ? values.back() : values.front();
  return s;
}

inline bool better(double a, double b, Direction dir) {
  return dir == Direction::Maximize ? a > b : a < b;
}

/// One (instance, seed) run.
struct RunRecord {
  std::size_t instance = 0;
  std::string instance_name;
  std::uint64_t seed = 0;
  std::vector<StepStats> steps;
  Genome best_genome;
  LatentTensor best_latent;
  double best_reward = 0.0;  // natural units
  std::uint64_t evaluations = 0;
  std::uint64_t generator_calls = 0;
  std::string best_image;  // path relative to the output directory, empty if none
  double wall_ms = 0.0;

  // Mean reward of the final step's evaluated set.
  double final_mean() const { return steps.empty() ? 0.0 : steps.back().mean; }

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

struct AxisSummary {
  double best_mean = 0.0;
  double best_std = 0.0;
  double mean_sample = 0.0;
  std::size_t count = 0;

  friend bool operator==(const AxisSummary&, const AxisSummary&) = default;
};

/// Aggregates are kept separately over runs, over instances (seed-averaged)
/// and over seeds (instance-averaged); the two axes are never pooled.
struct ReportAggregate {
  AxisSummary runs;
  AxisSummary instances;
  AxisSummary seeds;

  friend bool operator==(const ReportAggregate&, const ReportAggregate&) = default;
};

struct RunReport {
  RunConfig config;
  std::string reward_name;
  Direction direction = Direction::Maximize;
  std::string status = "complete";
  std::string error;
  std::vector<RunRecord> runs;
  ReportAggregate aggregate;

  friend bool operator==(const RunReport&, const RunReport&) = default;
};

namespace detail {

inline AxisSummary axis(const std::vector<std::pair<double, double>>& points) {
  AxisSummary a;
  a.count = points.size();
  if (points.empty()) return a;
  const double n = static_cast<double>(points.size());
  for (const auto& [best, mean] : points) {
    a.best_mean += best;
    a.mean_sample += mean;
  }
  a.best_mean /= n;
  a.mean_sample /= n;
  double ss = 0.0;
  for (const auto& [best, _] : points) ss += (best - a.best_mean) * (best - a.best_mean);
  a.best_std = std::sqrt(ss / n);
  return a;
}

template <typename Key>
std::vector<std::pair<double, double>> grouped(const std::vector<RunRecord>& runs, Key key) {
  std::map<decltype(key(runs.front())), std::vector<std::pair<double, double>>> groups;
  for (const auto& r : runs) groups[key(r)].emplace_back(r.best_reward, r.final_mean());
  std::vector<std::pair<double, double>> out;
  for (const auto& [_, pts] : groups) {
    const auto a = axis(pts);
    out.emplace_back(a.best_mean, a.mean_sample);
  }
  return out;
}

}  // namespace detail

inline ReportAggregate compute_aggregate(const std::vector<RunRecord>& runs) {
  ReportAggregate agg;
  if (runs.empty()) return agg;
  std::vector<std::pair<double, double>> all;
  for (const auto& r : runs) all.emplace_back(r.best_reward, r.final_mean());
  agg.runs = detail::axis(all);
  agg.instances = detail::axis(detail::grouped(runs, [](const RunRecord& r) { return r.instance; }));
  agg.seeds = detail::axis(detail::grouped(runs, [](const RunRecord& r) { return r.seed; }));
  return agg;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const StepStats& s) {
  return {{"step", s.step},     {"best", s.best},
          {"mean", s.mean},     {"median", s.median},
          {"std", s.std},       {"best_so_far", s.best_so_far},
          {"evaluations", s.evaluations}, {"generator_calls", s.generator_calls},
          {"ms", s.ms}};
}

inline StepStats step_stats_from_json(const nlohmann::json& j) {
  StepStats s;
  s.step = j.at("step").get<std::size_t>();
  s.best = j.at("best").get<double>();
  s.mean = j.at("mean").get<double>();
  s.median = j.at("median").get<double>();
  s.std = j.at("std").get<double>();
  s.best_so_far = j.at("best_so_far").get<double>();
  s.evaluations = j.at("evaluations").get<std::uint64_t>();
  s.generator_calls = j.at("generator_calls").get<std::uint64_t>();
  s.ms = j.at("ms").get<double>();
  return s;
}

inline nlohmann::json to_json(const AxisSummary& a) {
  return {{"best_mean", a.best_mean}, {"best_std", a.best_std}, {"mean_sample", a.mean_sample},
          {"count", a.count}};
}

inline AxisSummary axis_from_json(const nlohmann::json& j) {
  return {j.at("best_mean").get<double>(), j.at("best_std").get<double>(),
          j.at("mean_sample").get<double>(), j.at("count").get<std::size_t>()};
}

inline nlohmann::json to_json(const RunRecord& r) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : r.steps) steps.push_back(to_json(s));
  return {{"instance", r.instance},
          {"instance_name", r.instance_name},
          {"seed", r.seed},
          {"steps", steps},
          {"best_genome", genome_to_json(r.best_genome)},
          {"best_latent", base64::encode(encode_latent(r.best_latent))},
          {"best_reward", r.best_reward},
          {"evaluations", r.evaluations},
          {"generator_calls", r.generator_calls},
          {"best_image", r.best_image},
          {"wall_ms", r.wall_ms}};
}

inline RunRecord run_record_from_json(const nlohmann::json& j) {
  RunRecord r;
  r.instance = j.at("instance").get<std::size_t>();
  r.instance_name = j.at("instance_name").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& s : j.at("steps")) r.steps.push_back(step_stats_from_json(s));
  r.best_genome = genome_from_json(j.at("best_genome"));
  r.best_latent = decode_latent(base64::decode(j.at("best_latent").get<std::string>()));
  r.best_reward = j.at("best_reward").get<double>();
  r.evaluations = j.at("evaluations").get<std::uint64_t>();
  r.generator_calls = j.at("generator_calls").get<std::uint64_t>();
  r.best_image = j.at("best_image").get<std::string>();
  r.wall_ms = j.at("wall_ms").get<double>();
  return r;
}

inline nlohmann::json to_json(const RunReport& rep) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : rep.runs) runs.push_back(to_json(r));
  return {{"config", to_json(rep.config)},
          {"reward", rep.reward_name},
          {"direction", to_string(rep.direction)},
          {"status", rep.status},
          {"error", rep.error},
          {"runs", runs},
          {"aggregate",
           {{"runs", to_json(rep.aggregate.runs)},
            {"instances", to_json(rep.aggregate.instances)},
            {"seeds", to_json(rep.aggregate.seeds)}}}};
}

inline RunReport report_from_json(const nlohmann::json& j) {
  RunReport rep;
  rep.config = config_from_json(j.at("config"));
  rep.reward_name = j.at("reward").get<std::string>();
  rep.direction = direction_from_string(j.at("direction").get<std::string>());
  rep.status = j.at("status").get<std::string>();
  rep.error = j.at("error").get<std::string>();
  for (const auto& r : j.at("runs")) rep.runs.push_back(run_record_from_json(r));
  const auto& a = j.at("aggregate");
  rep.aggregate.runs = axis_from_json(a.at("runs"));
  rep.aggregate.instances = axis_from_json(a.at("instances"));
  rep.aggregate.seeds = axis_from_json(a.at("seeds"));
  return rep;
}

inline RunReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read report '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("report '" + path + "' is not valid JSON: " + e.what());
  }
  return report_from_json(j);
}

inline std::string steps_csv(const std::vector<StepStats>& steps) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "step,best,mean,median,std,evals,ms\n";
  for (const auto& s : steps)
    out << s.step << ',' << s.best << ',' << s.mean << ',' << s.median << ',' << s.std << ','
        << s.evaluations << ',' << s.ms << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Cross-report aggregation

struct SummaryRow {
  std::string algorithm;
  std::string solution_space;
  std::size_t runs = 0;
  double best_mean = 0.0;
  double best_std = 0.0;
  double mean_sample = 0.0;
  std::uint64_t evaluations_min = 0;  // per run
  std::uint64_t evaluations_max = 0;

  friend bool operator==(const SummaryRow&, const SummaryRow&) = default;
};

struct SummaryTable {
  std::string reward;
  Direction direction = Direction::Maximize;
  std::vector<SummaryRow> rows;
  // Row index pairs whose per-run evaluation budgets differ.
  std::vector<std::pair<std::size_t, std::size_t>> budget_mismatches;

  std::string csv() const;
  std::string text() const;
};

/// Pools runs per (algorithm, solution space); rows are sorted by key so the
/// result does not depend on report order.
inline SummaryTable aggregate_reports(const std::vector<RunReport>& reports) {
  if (reports.empty()) throw ConfigError("no reports to aggregate");
  SummaryTable t;
  t.reward = reports.front().reward_name;
  t.direction = reports.front().direction;
  std::map<std::pair<std::string, std::string>, std::vector<const RunRecord*>> groups;
  for (const auto& rep : reports) {
    if (rep.reward_name != t.reward || rep.direction != t.direction)
      throw HeterogeneousReward("reports mix rewards '" + t.reward + "' and '" + rep.reward_name + "'");
    for (const auto& r : rep.runs)
      groups[{to_string(rep.config.algorithm), to_string(rep.config.solution_space)}].push_back(&r);
  }
  for (const auto& [key, runs] : groups) {
    SummaryRow row;
    row.algorithm = key.first;
    row.solution_space = key.second;
    std::vector<std::pair<double, double>> pts;
    row.evaluations_min = UINT64_MAX;
    for (const auto* r : runs) {
      pts.emplace_back(r->best_reward, r->final_mean());
      row.evaluations_min = std::min(row.evaluations_min, r->evaluations);
      row.evaluations_max = std::max(row.evaluations_max, r->evaluations);
    }
    if (runs.empty()) row.evaluations_min = 0;
    const auto a = detail::axis(pts);
    row.runs = a.count;
    row.best_mean = a.best_mean;
    row.best_std = a.best_std;
    row.mean_sample = a.mean_sample;
    t.rows.push_back(row);
  }
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    for (std::size_t j = i + 1; j < t.rows.size(); ++j) {
      const auto& a = t.rows[i];
      const auto& b = t.rows[j];
      if (a.evaluations_min != b.evaluations_min || a.evaluations_max != b.evaluations_max ||
          a.evaluations_min != a.evaluations_max)
        t.budget_mismatches.emplace_back(i, j);
    }
  return t;
}

inline std::string SummaryTable::csv() const {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "algorithm,solution_space,runs,best_mean,best_std,mean_sample,evals_min,evals_max,equal_budget\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    bool equal = true;
    for (const auto& [a, b] : budget_mismatches)
      if (a == i || b == i) equal = false;
    out << r.algorithm << ',' << r.solution_space << ',' << r.runs << ',' << r.best_mean << ','
        << r.best_std << ',' << r.mean_sample << ',' << r.evaluations_min << ','
        << r.evaluations_max << ',' << (equal ? "yes" : "no") << '\n';
  }
  return out.str();
}

inline std::string SummaryTable::text() const {
  std::ostringstream out;
  out << "reward: " << reward << " (" << to_string(direction) << ")\n";
  out << std::left << std::setw(12) << "algorithm" << std::setw(11) << "space" << std::right
      << std::setw(6) << "runs" << std::setw(26) << "best (mean +- std)" << std::setw(14)
      << "mean sample" << std::setw(12) << "evals/run" << '\n';
  for (const auto& r : rows) {
    std::ostringstream best;
    best << std::fixed << std::setprecision(4) << r.best_mean << " +- " << r.best_std;
    std::ostringstream evals;
    evals << r.evaluations_min;
    if (r.evaluations_max != r.evaluations_min) evals << '-' << r.evaluations_max;
    out << std::left << std::setw(12) << r.algorithm << std::setw(11) << r.solution_space
        << std::right << std::setw(6) << r.runs << std::setw(26) << best.str() << std::setw(14)
        << std::fixed << std::setprecision(4) << r.mean_sample << std::setw(12) << evals.str()
        << '\n';
  }
  for (const auto& [a, b] : budget_mismatches)
    out << "budget mismatch: " << rows[a].algorithm << '/' << rows[a].solution_space << " vs "
        << rows[b].algorithm << '/' << rows[b].solution_space << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------

struct DiversityCurve {
  std::size_t instance = 0;
  std::uint64_t seed = 0;
  std::vector<double> std;
};

inline std::vector<DiversityCurve> diversity_series(const RunReport& report) {
  if (report.config.algorithm == Algorithm::BestOfN && report.config.steps == 1)
    throw NotPopulationAlgorithm("single-step best_of_n has no per-step population to track");
  std::vector<DiversityCurve> out;
  for (const auto& r : report.runs) {
    DiversityCurve c{r.instance, r.seed, {}};
    for (const auto& s : r.steps) c.std.push_back(s.std);
    out.push_back(std::move(c));
  }
  return out;
}

inline std::string diversity_csv(const std::vector<DiversityCurve>& curves) {
  std::ostringstream out;
  out << std::setprecision(17) << "instance,seed,step,std\n";
  for (const auto& c : curves)
    for (std::size_t i = 0; i < c.std.size(); ++i)
      out << c.instance << ',' << c.seed << ',' << i + 1 << ',' << c.std[i] << '\n';
  return out.str();
}

}  // namespace latent_evo
