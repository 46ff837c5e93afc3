// Acceptance suite: one PASS/FAIL line per criterion.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "latent_evo/latent_evo.hpp"
#include "oracles.hpp"

namespace le = latent_evo;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("latent_evo_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

le::RunConfig toy_config(le::Algorithm algo, std::size_t pop, std::size_t steps) {
  le::RunConfig c;
  c.algorithm = algo;
  c.population = pop;
  c.steps = steps;
  c.latent_shape = {4, 2, 2};
  c.generator.width = 64;
  c.generator.height = 64;
  c.reward.kind = le::RewardKind::TargetMean;
  c.output_dir = "";
  c.instances.seed = 2024;
  return c;
}

// ---------------------------------------------------------------------------

Outcome crossover_lemma() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t dim = 1000, children = 100;
  std::string detail;
  bool pass = true;
  for (const double p : {0.1, 0.5, 0.9}) {
    le::SeededRng rng(20240601, static_cast<std::uint64_t>(p * 1000));
    std::vector<double> pooled;
    pooled.reserve(dim * children);
    for (std::size_t k = 0; k < children; ++k) {
      std::vector<double> a(dim), b(dim);
      for (auto& x : a) x = rng.gaussian();
      for (auto& x : b) x = rng.gaussian();
      const auto child = le::uniform_crossover(a, b, p, rng);
      pooled.insert(pooled.end(), child.begin(), child.end());
    }
    const double d = oracle::ks_statistic(pooled);
    const double crit = oracle::ks_critical_001(pooled.size());
    pass = pass && d < crit;
    detail += fmt("p=%.1f D=%.5f (crit %.5f); ", p, d, crit);
  }
  const double secs = seconds_since(t0);
  pass = pass && secs < 5.0;
  return {pass, detail + fmt("%.2fs", secs)};
}

Outcome shell_preservation() {
  const auto t0 = std::chrono::steady_clock::now();
  const le::LatentShape shape{4, 24, 32};
  le::SeededRng rng(7, 11);
  const le::BaseNoise base{le::sample_standard_gaussian(shape, rng.substream(1))};
  const double ref = le::l2_norm(base.z);
  const le::GenomeSpace space{le::GenomeKind::ChannelTransform, shape};
  double worst_norm = 0.0, worst_orth = 0.0;
  for (std::size_t i = 0; i < 1000; ++i) {
    const auto g = space.random(i, rng);
    const auto z = le::realize(g, &base);
    worst_norm = std::max(worst_norm, std::abs(le::l2_norm(z) - ref) / ref);
    const auto q = le::qr_orthonormal(g.matrix());
    std::vector<double> qv(q.values().begin(), q.values().end());
    const auto qtq = oracle::matmul(oracle::transpose(qv, 4), qv, 4);
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 4; ++c)
        worst_orth = std::max(worst_orth, std::abs(qtq[r * 4 + c] - (r == c ? 1.0 : 0.0)));
  }
  const double secs = seconds_since(t0);
  return {worst_norm < 1e-9 && worst_orth < 1e-10 && secs < 10.0,
          fmt("max rel norm error %.2e, max |QtQ-I| %.2e, %.2fs", worst_norm, worst_orth, secs)};
}

Outcome evaluation_accounting() {
  auto ga = toy_config(le::Algorithm::Cosyne, 16, 15);
  const auto ga_report = le::run_alignment(ga);
  const auto ga_evals = ga_report.runs.front().evaluations;

  le::BudgetLedger ledger;
  const le::ToyDecoder dec({4, 2, 2}, 64, 64, 0);
  const le::TargetMeanReward reward({128, 128, 128});
  le::best_of_n(&dec, reward, 240, le::SeededRng(3, 0), 16, ledger, {4, 2, 2});
  const auto bon_evals = ledger.reward_evaluations();

  auto bon = toy_config(le::Algorithm::BestOfN, 16, 15);
  const auto bon_run = le::run_alignment(bon).runs.front().evaluations;

  le::GaState state = le::ga_init(16, {le::GenomeKind::DirectNoise, {4, 4, 4}}, {}, le::SeededRng(1, 2));
  auto first = le::ga_propose(state, le::SeededRng(1, 3));
  le::FitnessBatch fb;
  for (const auto& g : first.candidates) {
    fb.ids.push_back(g.id());
    fb.rewards.push_back(static_cast<double>(g.id()));
  }
  state = le::ga_update(state, first.candidates, fb);
  const auto extended = le::ga_propose(state, le::SeededRng(1, 4)).candidates.size();

  return {ga_evals == 360 && bon_evals == 240 && bon_run == 240 && extended == 24,
          fmt("cosyne P=16 S=15: %llu; best_of_n N=240: %llu (runner %llu); extended population %zu",
              (unsigned long long)ga_evals, (unsigned long long)bon_evals,
              (unsigned long long)bon_run, extended)};
}

Outcome optimizer_sanity() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t seeds = 50;
  const double threshold = -0.01 * 16;
  auto sphere = [](le::Algorithm algo, std::size_t steps) {
    le::RunConfig c;
    c.algorithm = algo;
    c.population = 16;
    c.steps = steps;
    c.latent_shape = {1, 4, 4};
    c.reward.kind = le::RewardKind::SphereProxy;
    c.output_dir = "";
    c.seeds.clear();
    for (std::uint64_t s = 0; s < 50; ++s) c.seeds.push_back(s);
    return c;
  };
  auto snes_cfg = sphere(le::Algorithm::Snes, 200);
  snes_cfg.engine.sigma0 = 1.0;
  auto pgpe_cfg = sphere(le::Algorithm::Pgpe, 500);
  pgpe_cfg.engine.sigma0 = 1.0;
  auto ga_cfg = sphere(le::Algorithm::Cosyne, 200);

  auto hits = [&](const le::RunReport& r) {
    std::size_t n = 0;
    for (const auto& run : r.runs) n += run.best_reward > threshold;
    return n;
  };
  const auto snes_hits = hits(le::run_alignment(snes_cfg));
  const auto pgpe_hits = hits(le::run_alignment(pgpe_cfg));
  std::size_t monotone = 0;
  for (const auto& run : le::run_alignment(ga_cfg).runs) {
    bool ok = true;
    for (std::size_t i = 1; i < run.steps.size(); ++i)
      ok = ok && run.steps[i].best_so_far >= run.steps[i - 1].best_so_far;
    monotone += ok;
  }
  const double secs = seconds_since(t0);
  const bool pass = snes_hits >= 45 && pgpe_hits >= 40 && monotone == seeds && secs < 60.0;
  return {pass, fmt("SNES %zu/50 within 200 steps, PGPE %zu/50 within 500 steps, GA monotone %zu/50, %.1fs",
                    snes_hits, pgpe_hits, monotone, secs)};
}

Outcome sample_efficiency() {
  const auto t0 = std::chrono::steady_clock::now();
  auto with_instances = [](le::RunConfig c) {
    c.instances.count = 60;
    c.seeds = {0, 1, 2};
    return c;
  };
  // Equal budget: 360 reward evaluations per run for every method.
  const auto ga = le::run_alignment(with_instances(toy_config(le::Algorithm::Cosyne, 16, 15)));
  const auto bon = le::run_alignment(with_instances(toy_config(le::Algorithm::BestOfN, 24, 15)));
  const auto zo = le::run_alignment(with_instances(toy_config(le::Algorithm::ZeroOrder, 24, 15)));
  auto per_instance = [](const le::RunReport& r) {
    std::vector<double> best(60, 0.0), n(60, 0.0);
    for (const auto& run : r.runs) {
      best[run.instance] += run.best_reward;
      n[run.instance] += 1.0;
    }
    for (std::size_t i = 0; i < 60; ++i) best[i] /= n[i];
    return best;
  };
  const auto g = per_instance(ga), b = per_instance(bon), z = per_instance(zo);
  std::size_t beat_bon = 0, beat_zo = 0;
  for (std::size_t i = 0; i < 60; ++i) {
    beat_bon += g[i] > b[i];
    beat_zo += g[i] > z[i];
  }
  const bool budget = ga.runs.front().evaluations == 360 && bon.runs.front().evaluations == 360 &&
                      zo.runs.front().evaluations == 360;
  const double secs = seconds_since(t0);
  return {budget && beat_bon >= 48 && beat_zo >= 36,
          fmt("CoSyNE beats Best-of-N in %zu/60, Zero-Order in %zu/60 (means %.3f / %.3f / %.3f), %.1fs",
              beat_bon, beat_zo, oracle::mean(g), oracle::mean(b), oracle::mean(z), secs)};
}

Outcome diversity_dynamics() {
  const auto t0 = std::chrono::steady_clock::now();
  auto cfg = [](le::Algorithm a) {
    auto c = toy_config(a, 16, 50);
    c.instances.count = 50;
    return c;
  };
  const auto ga = le::diversity_series(le::run_alignment(cfg(le::Algorithm::Cosyne)));
  const auto snes = le::diversity_series(le::run_alignment(cfg(le::Algorithm::Snes)));
  std::size_t collapsed = 0, sustained = 0;
  for (std::size_t s = 0; s < 50; ++s) {
    collapsed += ga[s].std.back() < ga[s].std.front();
    sustained += snes[s].std.back() > ga[s].std.back();
  }
  const double secs = seconds_since(t0);
  return {collapsed >= 48 && sustained >= 40 && secs < 600.0,
          fmt("GA std(50) < std(1) in %zu/50, SNES std(50) > GA std(50) in %zu/50, %.1fs", collapsed,
              sustained, secs)};
}

Outcome selection_pressure() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t steps = 50;
  std::vector<std::vector<std::size_t>> first_drop;
  for (const std::size_t k : {2, 4, 8}) {
    auto c = toy_config(le::Algorithm::Cosyne, 16, steps);
    c.engine.ga.tournament_size = k;
    c.instances.count = 30;
    std::vector<std::size_t> drops;
    for (const auto& curve : le::diversity_series(le::run_alignment(c))) {
      std::size_t at = steps + 1;  // never dropped within the horizon
      for (std::size_t i = 0; i < curve.std.size(); ++i)
        if (curve.std[i] < 0.25 * curve.std.front()) {
          at = i + 1;
          break;
        }
      drops.push_back(at);
    }
    first_drop.push_back(drops);
  }
  std::size_t ordered = 0, censored = 0;
  for (std::size_t s = 0; s < 30; ++s) {
    ordered += first_drop[0][s] >= first_drop[1][s] && first_drop[1][s] >= first_drop[2][s];
    for (const auto& d : first_drop) censored += d[s] > steps;
  }
  const double secs = seconds_since(t0);
  auto avg = [](const std::vector<std::size_t>& v) {
    double s = 0;
    for (auto x : v) s += static_cast<double>(x);
    return s / static_cast<double>(v.size());
  };
  return {ordered >= 24,
          fmt("non-increasing in %zu/30 seeds; mean first step k=2: %.1f, k=4: %.1f, k=8: %.1f; "
              "%zu of 90 curves never dropped; %.1fs",
              ordered, avg(first_drop[0]), avg(first_drop[1]), avg(first_drop[2]), censored, secs)};
}

Outcome jpeg_viability() {
  const auto t0 = std::chrono::steady_clock::now();
  auto c = toy_config(le::Algorithm::Cosyne, 16, 15);
  c.reward.kind = le::RewardKind::JpegSize;
  c.seeds.clear();
  for (std::uint64_t s = 0; s < 20; ++s) c.seeds.push_back(s);
  const auto report = le::run_alignment(c);

  // Best of the initial population, re-scored independently of the run.
  const le::ToyDecoder dec(c.latent_shape, 64, 64, c.generator.decoder_seed);
  std::size_t hits = 0;
  double mean_reduction = 0.0;
  for (const auto& run : report.runs) {
    const auto init = le::ga_init(16, {le::GenomeKind::DirectNoise, c.latent_shape}, c.engine.ga,
                                  le::run_rng(run.seed, 0).substream(le::streams::kInitialPopulation));
    double initial_best = 1e300;
    for (const auto& g : init.population)
      initial_best = std::min(initial_best, le::reward_jpeg_size(dec.generate(g.latent())));
    const double reduction = 1.0 - run.best_reward / initial_best;
    mean_reduction += reduction / 20.0;
    hits += reduction >= 0.20;
  }
  const double secs = seconds_since(t0);
  return {hits >= 18 && secs < 180.0,
          fmt("size reduced by >= 20%% in %zu/20 seeds (mean reduction %.1f%%), %.1fs", hits,
              100.0 * mean_reduction, secs)};
}

Outcome determinism() {
  const auto dir = scratch_dir("determinism");
  auto c = toy_config(le::Algorithm::Cosyne, 16, 5);
  c.seeds = {3, 4};
  auto strip = [](nlohmann::json j) {
    for (auto& run : j["runs"]) {
      run.erase("wall_ms");
      for (auto& s : run["steps"]) s.erase("ms");
    }
    return j.dump();
  };
  std::string texts[2];
  for (int i = 0; i < 2; ++i) {
    c.output_dir = (dir / ("r" + std::to_string(i))).string();
    le::run_alignment(c);
    std::ifstream in(fs::path(c.output_dir) / "report.json");
    auto j = nlohmann::json::parse(in);
    j["config"]["output_dir"] = "";
    texts[i] = strip(j);
  }
  const bool same_report = texts[0] == texts[1];

  const le::ToyDecoder dec({4, 4, 4}, 64, 64, 9);
  const le::TargetMeanReward reward({120, 130, 140});
  const auto state = le::ga_init(16, {le::GenomeKind::DirectNoise, {4, 4, 4}}, {}, le::SeededRng(5, 6));
  le::BudgetLedger l1, l16;
  const auto a = le::batch_evaluate(state.population, nullptr, &dec, reward, 1, l1);
  const auto b = le::batch_evaluate(state.population, nullptr, &dec, reward, 16, l16);
  const bool same_batch = a.fitness == b.fitness && a.raw == b.raw && a.batches == 16 && b.batches == 1;
  fs::remove_all(dir);
  return {same_report && same_batch,
          fmt("report.json identical: %s; B=1 vs B=16 fitness identical: %s", same_report ? "yes" : "no",
              same_batch ? "yes" : "no")};
}

Outcome subprocess_protocol() {
  const auto dir = scratch_dir("subprocess");
  const std::string ok = (dir / "stub_ok.py").string();
  const std::string bad = (dir / "stub_malformed.py").string();
  le::write_stub(ok, le::StubMode::Ok);
  le::write_stub(bad, le::StubMode::Malformed);

  const le::LatentShape shape{4, 4, 4};
  bool parsed = false;
  try {
    const le::SubprocessGenerator gen(shape, 8, 8, {ok, "8", "8"}, std::chrono::milliseconds(20000));
    const auto img = gen.generate(le::sample_standard_gaussian(shape, le::SeededRng(1, 1)));
    parsed = img.width == 8 && img.height == 8 && img.pixels.size() == 192;
  } catch (const std::exception&) {
  }

  auto c = toy_config(le::Algorithm::Cosyne, 4, 2);
  c.generator.kind = le::GeneratorKind::Subprocess;
  c.generator.width = c.generator.height = 8;
  c.generator.command = {ok, "8", "8"};
  c.output_dir = (dir / "run").string();
  bool completed = false;
  try {
    const auto rep = le::run_alignment(c);
    completed = rep.status == "complete" && rep.runs.front().evaluations == 12 &&
                fs::exists(fs::path(c.output_dir) / "report.json") &&
                fs::exists(fs::path(c.output_dir) / "best.ppm");
  } catch (const std::exception&) {
  }

  bool malformed = false;
  try {
    const le::SubprocessGenerator gen(shape, 8, 8, {bad, "8", "8"}, std::chrono::milliseconds(20000));
    gen.generate(le::sample_standard_gaussian(shape, le::SeededRng(1, 1)));
  } catch (const le::MalformedOutput&) {
    malformed = true;
  } catch (const std::exception&) {
  }

  // Inside a run the failure surfaces as an error report, not a crash.
  c.generator.command = {bad, "8", "8"};
  c.output_dir = (dir / "bad_run").string();
  bool aborted_cleanly = false;
  try {
    le::run_alignment(c);
  } catch (const le::EvaluationError& e) {
    try {
      e.rethrow_first();
    } catch (const le::MalformedOutput&) {
      const auto rep = le::load_report((fs::path(c.output_dir) / "report.json").string());
      aborted_cleanly = rep.status == "aborted";
    } catch (...) {
    }
  } catch (...) {
  }
  fs::remove_all(dir);
  return {parsed && completed && malformed && aborted_cleanly,
          fmt("stub image parsed: %s; stub run completed: %s; malformed -> MalformedOutput: %s; "
              "aborted run left a report: %s",
              parsed ? "yes" : "no", completed ? "yes" : "no", malformed ? "yes" : "no",
              aborted_cleanly ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"crossover lemma", crossover_lemma},
      {"shell preservation", shell_preservation},
      {"evaluation accounting", evaluation_accounting},
      {"optimizer sanity", optimizer_sanity},
      {"sample-efficiency ordering", sample_efficiency},
      {"diversity dynamics", diversity_dynamics},
      {"selection-pressure ablation", selection_pressure},
      {"JPEG reward viability", jpeg_viability},
      {"determinism and batch invariance", determinism},
      {"subprocess protocol", subprocess_protocol},
  };
  std::set<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.insert(std::strtoul(argv[i], nullptr, 10));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && !only.count(i + 1)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << i + 1 << "] " << criteria[i].first << ": "
              << o.detail << std::endl;
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
