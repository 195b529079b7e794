#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <utility>
#include <vector>

#include "harmonia/corpus_index.hpp"
#include "harmonia/errors.hpp"
#include "harmonia/fitness.hpp"
#include "harmonia/pianoroll.hpp"
#include "harmonia/rng.hpp"

namespace harmonia {

enum class GAMode { kGA1, kGA2 };

struct GAConfig {
  int iterations = 3600;
  int population = 15;
  double crossover_rate = 0.5;
  double mutation_rate = 0.1;
  int channels = 2;
  int steps = 128;
  std::uint64_t seed = 1;
  GAMode mode = GAMode::kGA1;

  void validate() const {
    if (iterations < 1) throw InvalidConfig("iterations must be >= 1");
    if (population < 2) throw InvalidConfig("population must be >= 2");
    if (!(crossover_rate >= 0 && crossover_rate <= 1))
      throw InvalidConfig("crossover_rate must be in [0, 1]");
    if (!(mutation_rate >= 0 && mutation_rate <= 1))
      throw InvalidConfig("mutation_rate must be in [0, 1]");
    if (channels < 1) throw InvalidConfig("channels must be >= 1");
    if (steps < 1) throw InvalidConfig("steps must be >= 1");
  }
};

/// What the GA sees of one chromosome. GA2 additionally carries the two
/// listener-model scores; they stay -1 for GA1.
struct Evaluation {
  double fitness = 0.0;
  FitnessBreakdown breakdown;
  double x2 = -1.0;
  double x3 = -1.0;
};

using Evaluator = std::function<Evaluation(const Chromosome&)>;

struct IterationRecord {
  int iteration = 0;  // 1-based
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
  FitnessBreakdown best_breakdown;
  double elapsed_ms = 0.0;
};

struct RunLog {
  std::vector<IterationRecord> records;
  std::vector<Chromosome> final_population;  // last evaluated generation
};

inline void write_runlog_csv(std::ostream& out, const RunLog& log) {
  out << "iteration,best_fitness,mean_fitness,cost,score,elapsed_ms\n";
  for (const auto& r : log.records) {
    out << r.iteration << ',' << format_double(r.best_fitness) << ','
        << format_double(r.mean_fitness) << ',' << r.best_breakdown.cost << ','
        << format_double(r.best_breakdown.score) << ',' << format_double(r.elapsed_ms)
        << "\n";
  }
}

struct RunResult {
  Chromosome best;
  Evaluation best_eval;
  RunLog log;
};

namespace detail {

/// Draw a pitch that does not duplicate any other channel's gene at this
/// step. With a too-narrow distribution the slot falls back to silence.
inline std::uint8_t sample_distinct_pitch(const Chromosome& chrom, int channel, int step,
                                          const CorpusIndex& index, Rng& rng) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    auto gene = static_cast<std::uint8_t>(sample_pitch(index, rng) + 1);
    bool clash = false;
    for (int c = 0; c < chrom.channels; ++c) {
      if (c != channel && chrom.gene(c, step) == gene) {
        clash = true;
        break;
      }
    }
    if (!clash) return gene;
  }
  return 0;
}

}  // namespace detail

/// Seed a population from the corpus note distribution: each gene is a rest
/// with the corpus rest probability, otherwise a corpus-sampled pitch.
inline std::vector<Chromosome> init_population(const GAConfig& cfg, const CorpusIndex& index,
                                               Rng& rng) {
  cfg.validate();
  double rest_prob = note_probability(index, kRestSymbol);
  std::vector<Chromosome> population;
  population.reserve(cfg.population);
  for (int i = 0; i < cfg.population; ++i) {
    Chromosome chrom(cfg.channels, cfg.steps);
    for (int c = 0; c < cfg.channels; ++c) {
      for (int s = 0; s < cfg.steps; ++s) {
        if (rng.next_double() < rest_prob) continue;
        chrom.set_gene(c, s, detail::sample_distinct_pitch(chrom, c, s, index, rng));
      }
    }
    canonicalize_channels(chrom);
    population.push_back(std::move(chrom));
  }
  return population;
}

/// One child from two parents: first half of the steps from best1, the rest
/// from best2, across all channels. The split point is fixed at the temporal
/// midpoint so vertical sonorities survive intact.
inline Chromosome crossover(const Chromosome& best1, const Chromosome& best2) {
  if (best1.channels != best2.channels || best1.steps != best2.steps)
    throw ShapeMismatch("crossover parents must share channels x steps shape");
  Chromosome child(best1.channels, best1.steps);
  int split = best1.steps / 2;
  for (int c = 0; c < child.channels; ++c) {
    for (int s = 0; s < child.steps; ++s)
      child.set_gene(c, s, (s < split ? best1 : best2).gene(c, s));
  }
  return child;
}

/// Flip each gene independently with probability `rate`: sounding genes go
/// silent, silent genes activate with a corpus-sampled pitch.
inline Chromosome mutate(Chromosome child, double rate, const CorpusIndex& index, Rng& rng) {
  if (!(rate >= 0 && rate <= 1)) throw InvalidConfig("mutation rate must be in [0, 1]");
  for (int c = 0; c < child.channels; ++c) {
    for (int s = 0; s < child.steps; ++s) {
      if (rng.next_double() >= rate) continue;
      if (child.gene(c, s) != 0) {
        child.set_gene(c, s, 0);
      } else {
        child.set_gene(c, s, detail::sample_distinct_pitch(child, c, s, index, rng));
      }
    }
  }
  return child;
}

/// The shared GA loop: evaluate, keep the two fittest unchanged (elitism),
/// refill with crossover/elite-copy offspring, mutate the offspring.
/// Deterministic for a fixed (config, seed, corpus, evaluator).
inline RunResult run(const GAConfig& cfg, const Evaluator& evaluator, const CorpusIndex& index) {
  cfg.validate();
  if (!evaluator) throw InvalidConfig("run requires an evaluator");

  Rng rng(cfg.seed);
  std::vector<Chromosome> population = init_population(cfg, index, rng);

  RunResult result;
  double best_fitness = -std::numeric_limits<double>::infinity();

  std::vector<Evaluation> evals(population.size());
  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    auto t0 = std::chrono::steady_clock::now();

    double sum = 0.0;
    for (std::size_t i = 0; i < population.size(); ++i) {
      evals[i] = evaluator(population[i]);
      sum += evals[i].fitness;
    }

    // Top two, ties broken by lower index.
    std::size_t b1 = 0;
    for (std::size_t i = 1; i < population.size(); ++i)
      if (evals[i].fitness > evals[b1].fitness) b1 = i;
    std::size_t b2 = (b1 == 0) ? 1 : 0;
    for (std::size_t i = 0; i < population.size(); ++i) {
      if (i == b1) continue;
      if (evals[i].fitness > evals[b2].fitness) b2 = i;
    }

    if (evals[b1].fitness > best_fitness) {
      best_fitness = evals[b1].fitness;
      result.best = population[b1];
      result.best_eval = evals[b1];
    }

    IterationRecord rec;
    rec.iteration = iter;
    rec.best_fitness = evals[b1].fitness;
    rec.mean_fitness = sum / static_cast<double>(population.size());
    rec.best_breakdown = evals[b1].breakdown;

    if (iter < cfg.iterations) {
      std::vector<Chromosome> next;
      next.reserve(population.size());
      next.push_back(population[b1]);
      next.push_back(population[b2]);
      while (next.size() < population.size()) {
        Chromosome child = (rng.next_double() < cfg.crossover_rate)
                               ? crossover(population[b1], population[b2])
                               : population[rng.next_bool() ? b2 : b1];
        child = mutate(std::move(child), cfg.mutation_rate, index, rng);
        // Keep the melody-on-channel-0 convention a loop invariant so that
        // exported rolls re-import and re-score to identical values.
        canonicalize_channels(child);
        next.push_back(std::move(child));
      }
      population = std::move(next);
    }

    rec.elapsed_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
    result.log.records.push_back(rec);
  }
  result.log.final_population = population;
  return result;
}

}  // namespace harmonia
