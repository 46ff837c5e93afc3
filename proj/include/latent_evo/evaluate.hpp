#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "latent_evo/engine.hpp"
#include "latent_evo/generator.hpp"
#include "latent_evo/reward.hpp"
#include "latent_evo/solution_space.hpp"

namespace latent_evo {

/// Evaluation counters. Every reward invocation counts once, so a batch of B
/// candidates adds B.
class BudgetLedger {
 public:
  void add_generator_calls(std::uint64_t n) {
    std::lock_guard lock(mu_);
    generator_calls_ += n;
  }
  void add_reward_evaluations(std::uint64_t n) {
    std::lock_guard lock(mu_);
    reward_evaluations_ += n;
  }
  void record_step_ms(double ms) {
    std::lock_guard lock(mu_);
    step_ms_.push_back(ms);
  }

  std::uint64_t generator_calls() const {
    std::lock_guard lock(mu_);
    return generator_calls_;
  }
  std::uint64_t reward_evaluations() const {
    std::lock_guard lock(mu_);
    return reward_evaluations_;
  }
  std::vector<double> step_ms() const {
    std::lock_guard lock(mu_);
    return step_ms_;
  }

 private:
  mutable std::mutex mu_;
  std::uint64_t generator_calls_ = 0;
  std::uint64_t reward_evaluations_ = 0;
  std::vector<double> step_ms_;
};

/// Raised when any candidate in a batch fails; lists every failing genome and
/// keeps the first underlying exception for callers that need its type.
class EvaluationError : public GeneratorError {
 public:
  EvaluationError(std::string what, std::vector<std::pair<std::uint64_t, std::string>> failures,
                  std::exception_ptr first)
      : GeneratorError(std::move(what)), failures_(std::move(failures)), first_(std::move(first)) {}

  const std::vector<std::pair<std::uint64_t, std::string>>& failures() const noexcept {
    return failures_;
  }
  [[noreturn]] void rethrow_first() const { std::rethrow_exception(first_); }

 private:
  std::vector<std::pair<std::uint64_t, std::string>> failures_;
  std::exception_ptr first_;
};

struct EvaluationBatch {
  FitnessBatch fitness;      // oriented: higher is better
  std::vector<double> raw;   // reward in its natural units
  std::size_t batches = 0;
};

// Parallelism cap from LATENT_EVO_THREADS, else the hardware concurrency.
inline std::size_t evaluation_thread_cap() {
  if (const char* env = std::getenv("LATENT_EVO_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Scores one candidate: realize, generate (when the reward looks at images), score.
inline double evaluate_one(const Genome& g, const BaseNoise* base, const Generator* generator,
                           const Reward& reward, BudgetLedger& ledger) {
  const LatentTensor z = realize(g, base);
  std::optional<Image> img;
  if (reward.needs_image()) {
    if (generator == nullptr) throw GeneratorError("reward needs an image but no generator is set");
    img = generator->generate(z);
    ledger.add_generator_calls(1);
  }
  const double raw = reward.score(img ? &*img : nullptr, z);
  if (!std::isfinite(raw)) throw InvalidValue("reward returned a non-finite value");
  ledger.add_reward_evaluations(1);
  return raw;
}

/// Evaluates candidates in consecutive batches of `batch_size`, running up to
/// that many (capped by evaluation_thread_cap) concurrently. Results are
/// positional and do not depend on the batch size.
inline EvaluationBatch batch_evaluate(const std::vector<Genome>& genomes, const BaseNoise* base,
                                      const Generator* generator, const Reward& reward,
                                      std::size_t batch_size, BudgetLedger& ledger) {
  if (batch_size < 1) throw BadConfig("batch size must be >= 1");
  const std::size_t n = genomes.size();
  EvaluationBatch out;
  out.raw.assign(n, 0.0);
  std::vector<std::exception_ptr> errors(n);

  const std::size_t cap = evaluation_thread_cap();
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t stop = std::min(n, start + batch_size);
    ++out.batches;
    std::atomic<std::size_t> next{start};
    auto worker = [&] {
      for (std::size_t i = next++; i < stop; i = next++) {
        try {
          out.raw[i] = evaluate_one(genomes[i], base, generator, reward, ledger);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    const std::size_t workers = std::min(cap, stop - start);
    if (workers <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
  }

  std::vector<std::pair<std::uint64_t, std::string>> failures;
  std::exception_ptr first;
  std::string message;
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i]) continue;
    if (!first) first = errors[i];
    std::string what = "unknown error";
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    if (failures.size() < 8) message += "\n  genome " + std::to_string(genomes[i].id()) + ": " + what;
    failures.emplace_back(genomes[i].id(), std::move(what));
  }
  if (!failures.empty())
    throw EvaluationError(std::to_string(failures.size()) + " of " + std::to_string(n) +
                              " evaluations failed:" + message,
                          std::move(failures), first);

  out.fitness.ids.reserve(n);
  out.fitness.rewards.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.fitness.ids.push_back(genomes[i].id());
    out.fitness.rewards.push_back(reward.oriented(out.raw[i]));
  }
  return out;
}

}  // namespace latent_evo
