#pragma once

#include <glob.h>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "latent_evo/report.hpp"
#include "latent_evo/runner.hpp"
#include "latent_evo/stub.hpp"

namespace latent_evo {

namespace detail {

inline std::vector<std::string> expand_globs(const std::vector<std::string>& patterns) {
  std::vector<std::string> files;
  for (const auto& p : patterns) {
    glob_t g{};
    if (::glob(p.c_str(), 0, nullptr, &g) == 0)
      for (std::size_t i = 0; i < g.gl_pathc; ++i) files.emplace_back(g.gl_pathv[i]);
    ::globfree(&g);
  }
  std::sort(files.begin(), files.end());
  files.erase(std::unique(files.begin(), files.end()), files.end());
  return files;
}

}  // namespace detail

/// Entry point of the `latent-evo` tool. Returns 0 on success, 1 on
/// configuration or usage errors, 2 on runtime failures.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"Evolutionary latent-noise search for black-box generators", "latent-evo"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run an experiment from a JSON config");
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> steps, algo, space, out_dir;
  std::optional<std::size_t> pop, batch;
  run->add_option("config", config_path, "Config file")->required();
  run->add_option("--seed", seed, "Run a single seed");
  run->add_option("--steps", steps, "Step count, or short|long");
  run->add_option("--algo", algo, "cosyne|snes|pgpe|best_of_n|zero_order");
  run->add_option("--space", space, "direct|transform");
  run->add_option("--pop", pop, "Population size");
  run->add_option("--batch", batch, "Evaluation batch size");
  run->add_option("--out", out_dir, "Output directory");

  auto* agg = app.add_subcommand("aggregate", "Summarize reports matching glob patterns");
  std::vector<std::string> patterns;
  std::string agg_csv;
  agg->add_option("reports", patterns, "report.json paths or globs")->required();
  agg->add_option("--csv", agg_csv, "Also write the table as CSV");

  auto* stats = app.add_subcommand("stats", "Print per-step curves from a report");
  std::string stats_report;
  std::string stats_kind = "steps";
  stats->add_option("report", stats_report, "report.json")->required();
  stats->add_option("--kind", stats_kind, "steps|diversity")
      ->check(CLI::IsMember({"steps", "diversity"}));

  auto* stub = app.add_subcommand("gen-stub", "Write a subprocess-generator test stub");
  std::string stub_path;
  std::string stub_mode = "ok";
  stub->add_option("path", stub_path, "Output script path")->required();
  stub->add_option("--mode", stub_mode, "ok|fail|malformed|hang")
      ->check(CLI::IsMember({"ok", "fail", "malformed", "hang"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run) {
      RunConfig cfg = load_config(config_path);
      if (seed) cfg.seeds = {*seed};
      if (steps) {
        if (*steps == "short") cfg.steps = kShortHorizon;
        else if (*steps == "long") cfg.steps = kLongHorizon;
        else {
          try {
            cfg.steps = std::stoul(*steps);
          } catch (const std::exception&) {
            throw ConfigError("--steps expects a number, short or long");
          }
        }
      }
      if (algo) cfg.algorithm = algorithm_from_string(*algo);
      if (space) {
        try {
          cfg.solution_space = genome_kind_from_string(*space);
        } catch (const BadConfig& e) {
          throw ConfigError(e.what());
        }
      }
      if (pop) cfg.population = *pop;
      if (batch) cfg.batch = *batch;
      if (out_dir) cfg.output_dir = *out_dir;
      const auto report = run_alignment(cfg);
      const auto& a = report.aggregate.runs;
      out << to_string(cfg.algorithm) << '/' << to_string(cfg.solution_space) << ": " << a.count
          << " run(s), best " << a.best_mean << " +- " << a.best_std << ", mean sample "
          << a.mean_sample << ", " << report.runs.front().evaluations << " evaluations/run\n";
      if (!cfg.output_dir.empty())
        out << "report written to " << (std::filesystem::path(cfg.output_dir) / "report.json").string()
            << '\n';
    } else if (*agg) {
      const auto files = detail::expand_globs(patterns);
      if (files.empty()) throw ConfigError("no reports match the given patterns");
      std::vector<RunReport> reports;
      for (const auto& f : files) reports.push_back(load_report(f));
      const auto table = aggregate_reports(reports);
      out << table.text();
      if (!agg_csv.empty()) detail::write_text(agg_csv, table.csv());
    } else if (*stats) {
      const auto report = load_report(stats_report);
      if (stats_kind == "diversity") {
        out << diversity_csv(diversity_series(report));
      } else {
        for (const auto& r : report.runs) {
          out << "# " << r.instance_name << " seed " << r.seed << '\n';
          out << steps_csv(r.steps);
        }
      }
    } else if (*stub) {
      const StubMode m = stub_mode == "fail"        ? StubMode::Fail
                         : stub_mode == "malformed" ? StubMode::Malformed
                         : stub_mode == "hang"      ? StubMode::Hang
                                                    : StubMode::Ok;
      write_stub(stub_path, m);
      out << "stub written to " << stub_path << " (usage: " << stub_path << " WIDTH HEIGHT)\n";
    }
  } catch (const ConfigError& e) {
    err << "latent-evo: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "latent-evo: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace latent_evo
