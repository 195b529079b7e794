#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "harmonia/corpus_index.hpp"
#include "harmonia/errors.hpp"
#include "harmonia/pianoroll.hpp"
#include "harmonia/strings.hpp"

namespace harmonia {

/// Which vertical sonorities count as allowed by the harmony rule.
enum class VerticalPolicy {
  kCorpusOnly,      // pitch-class set attested in the corpus
  kTriadOnly,       // subset of some major or minor triad
  kCorpusOrTriad,   // either of the above
};

struct RuleConfig {
  int max_melodic_leap = 12;  // semitones
  bool forbid_tritone_leap = true;
  int meter_ticks = 64;  // ticks per bar; 4/4 on the 1/64-whole grid
  VerticalPolicy allowed_vertical = VerticalPolicy::kCorpusOrTriad;
  bool penalize_unseen_transition = true;

  void validate() const {
    if (max_melodic_leap < 1) throw InvalidConfig("max_melodic_leap must be >= 1");
    if (meter_ticks < 1) throw InvalidConfig("meter_ticks must be >= 1");
  }
};

struct ViolationCounts {
  long long rhythm = 0;
  long long melodic = 0;
  long long harmony = 0;
  long long transition = 0;

  long long total() const { return rhythm + melodic + harmony + transition; }

  friend bool operator==(const ViolationCounts&, const ViolationCounts&) = default;
};

struct SimilarityCounts {
  long long n2 = 0, n3 = 0, n4 = 0;  // melodic window matches per order
  long long s2 = 0, s3 = 0, s4 = 0;  // vertical matches per (column, size)
  long long l = 0;                   // notes in the chromosome
  double score = 0.0;

  friend bool operator==(const SimilarityCounts&, const SimilarityCounts&) = default;
};

/// Everything the two objective functions produce for one chromosome.
struct FitnessBreakdown {
  double score = 0.0;
  long long cost = 0;
  ViolationCounts violations;
  double objective = 0.0;
  long long n2 = 0, n3 = 0, n4 = 0;
  long long s2 = 0, s3 = 0, s4 = 0;
  long long m = 0;  // notes in the corpus
  long long l = 0;  // notes in the chromosome
  double epsilon = 0.0;

  static std::string csv_header() {
    return "score,cost,rhythm,melodic,harmony,transition,objective,"
           "n2,n3,n4,s2,s3,s4,m,l,epsilon";
  }

  std::string csv_row() const {
    std::string s;
    s += format_double(score);
    s += ',' + std::to_string(cost);
    s += ',' + std::to_string(violations.rhythm);
    s += ',' + std::to_string(violations.melodic);
    s += ',' + std::to_string(violations.harmony);
    s += ',' + std::to_string(violations.transition);
    s += ',' + format_double(objective);
    s += ',' + std::to_string(n2) + ',' + std::to_string(n3) + ',' + std::to_string(n4);
    s += ',' + std::to_string(s2) + ',' + std::to_string(s3) + ',' + std::to_string(s4);
    s += ',' + std::to_string(m) + ',' + std::to_string(l);
    s += ',' + format_double(epsilon);
    return s;
  }
};

namespace detail {

/// The 24 major/minor triad pitch-class masks.
inline const std::vector<std::uint16_t>& triad_masks() {
  static const std::vector<std::uint16_t> masks = [] {
    std::vector<std::uint16_t> out;
    for (int root = 0; root < 12; ++root) {
      std::uint16_t maj = 0, min = 0;
      for (int iv : {0, 4, 7}) maj |= static_cast<std::uint16_t>(1u << ((root + iv) % 12));
      for (int iv : {0, 3, 7}) min |= static_cast<std::uint16_t>(1u << ((root + iv) % 12));
      out.push_back(maj);
      out.push_back(min);
    }
    return out;
  }();
  return masks;
}

inline bool subset_of_triad(std::uint16_t mask) {
  for (auto triad : triad_masks())
    if ((mask & ~triad) == 0) return true;
  return false;
}

inline bool corpus_allows(const CorpusIndex& index, std::uint16_t mask, int cardinality) {
  if (cardinality <= 4) return index.has_vertical(mask);
  // Wider sonorities than the indexed sizes: require every 4-subset.
  auto classes = mask_to_classes(mask);
  int n = static_cast<int>(classes.size());
  for (std::uint32_t bits = 1; bits < (1u << n); ++bits) {
    if (__builtin_popcount(bits) != 4) continue;
    std::uint16_t sub = 0;
    for (int i = 0; i < n; ++i)
      if (bits & (1u << i)) sub |= static_cast<std::uint16_t>(1u << classes[i]);
    if (!index.has_vertical(sub)) return false;
  }
  return true;
}

inline bool vertical_allowed(const CorpusIndex& index, const RuleConfig& rules,
                             std::uint16_t mask, int cardinality) {
  if (cardinality < 2) return true;  // unisons and octave doublings
  switch (rules.allowed_vertical) {
    case VerticalPolicy::kCorpusOnly:
      return corpus_allows(index, mask, cardinality);
    case VerticalPolicy::kTriadOnly:
      return subset_of_triad(mask);
    case VerticalPolicy::kCorpusOrTriad:
      return corpus_allows(index, mask, cardinality) || subset_of_triad(mask);
  }
  return false;
}

/// Does any size-k subset of `classes` appear in the corpus vertical sets?
inline bool any_k_subset_matches(const CorpusIndex& index, const std::vector<int>& classes,
                                 int k) {
  int n = static_cast<int>(classes.size());
  if (k > n) return false;
  for (std::uint32_t bits = 1; bits < (1u << n); ++bits) {
    if (__builtin_popcount(bits) != k) continue;
    std::uint16_t mask = 0;
    for (int i = 0; i < n; ++i)
      if (bits & (1u << i)) mask |= static_cast<std::uint16_t>(1u << classes[i]);
    if (index.has_vertical(mask)) return true;
  }
  return false;
}

}  // namespace detail

/// Count rule violations: bar-boundary breaks on the melody lane, oversized
/// or tritone melodic leaps, disallowed vertical sonorities, and melody
/// transitions unattested in the corpus.
inline ViolationCounts count_violations(const Chromosome& chrom, const CorpusIndex& index,
                                        const RuleConfig& rules) {
  rules.validate();
  ViolationCounts counts;

  // Rhythm: a melody note held across a bar boundary, plus an incomplete
  // final bar.
  for (int t = rules.meter_ticks; t < chrom.steps; t += rules.meter_ticks) {
    std::uint8_t before = chrom.gene(0, t - 1);
    if (before != 0 && before == chrom.gene(0, t)) ++counts.rhythm;
  }
  if (chrom.steps % rules.meter_ticks != 0) ++counts.rhythm;

  // Melodic intervals over the rest-skipped note sequence.
  auto melody = melody_sequence(chrom);
  for (std::size_t i = 0; i + 1 < melody.size(); ++i) {
    int leap = std::abs(melody[i + 1] - melody[i]);
    if (leap > rules.max_melodic_leap) ++counts.melodic;
    if (rules.forbid_tritone_leap && leap == 6) ++counts.melodic;
  }

  // Harmony: every sounding column with two or more distinct pitch classes
  // must be allowed by the configured policy.
  PianoMatrix m = chromosome_to_matrix(chrom);
  for (int col = 0; col < m.cols(); ++col) {
    auto pitches = m.column_pitches(col);
    if (pitches.size() < 2) continue;
    std::uint16_t mask = 0;
    for (int p : pitches) mask |= static_cast<std::uint16_t>(1u << pitch_class(p));
    int cardinality = __builtin_popcount(mask);
    if (!detail::vertical_allowed(index, rules, mask, cardinality)) ++counts.harmony;
  }

  // Transitions: melody bigrams must be corpus-attested.
  if (rules.penalize_unseen_transition) {
    for (std::size_t i = 0; i + 1 < melody.size(); ++i) {
      int pair[2] = {melody[i], melody[i + 1]};
      if (!index.has_ngram(pair, 2)) ++counts.transition;
    }
  }
  return counts;
}

/// Corpus-similarity Score: token-level n-gram and vertical matches on the
/// chromosome against the type-level corpus sets, scaled by 1 / (M * L).
inline SimilarityCounts similarity_score(const Chromosome& chrom, const CorpusIndex& index) {
  SimilarityCounts counts;
  counts.l = chrom.note_count();

  auto melody = melody_sequence(chrom);
  for (int order = 2; order <= 4; ++order) {
    long long n = 0;
    for (std::size_t i = 0; i + order <= melody.size(); ++i)
      if (index.has_ngram(melody.data() + i, order)) ++n;
    (order == 2 ? counts.n2 : order == 3 ? counts.n3 : counts.n4) = n;
  }

  PianoMatrix m = chromosome_to_matrix(chrom);
  for (int col = 0; col < m.cols(); ++col) {
    auto pitches = m.column_pitches(col);
    if (pitches.size() < 2) continue;
    std::uint16_t mask = 0;
    for (int p : pitches) mask |= static_cast<std::uint16_t>(1u << pitch_class(p));
    auto classes = detail::mask_to_classes(mask);
    if (detail::any_k_subset_matches(index, classes, 2)) ++counts.s2;
    if (detail::any_k_subset_matches(index, classes, 3)) ++counts.s3;
    if (detail::any_k_subset_matches(index, classes, 4)) ++counts.s4;
  }

  if (counts.l >= 1 && index.total_notes >= 1) {
    double weighted = static_cast<double>(counts.n2) + 10.0 * counts.n3 + 100.0 * counts.n4 +
                      static_cast<double>(counts.s2) + 10.0 * counts.s3 + 100.0 * counts.s4;
    counts.score = weighted / (static_cast<double>(index.total_notes) *
                               static_cast<double>(counts.l));
  }
  return counts;
}

/// Stage-one objective: Score plus the violation bonus term
/// epsilon / (epsilon + Cost). Maximized by the GA.
inline FitnessBreakdown ga1_objective(const Chromosome& chrom, const CorpusIndex& index,
                                      const RuleConfig& rules, double epsilon = 0.001) {
  if (!(epsilon > 0)) throw InvalidConfig("epsilon must be > 0");
  FitnessBreakdown b;
  b.violations = count_violations(chrom, index, rules);
  b.cost = b.violations.total();

  auto sim = similarity_score(chrom, index);
  b.score = sim.score;
  b.n2 = sim.n2;
  b.n3 = sim.n3;
  b.n4 = sim.n4;
  b.s2 = sim.s2;
  b.s3 = sim.s3;
  b.s4 = sim.s4;
  b.l = sim.l;
  b.m = index.total_notes;
  b.epsilon = epsilon;
  b.objective = b.score + epsilon / (epsilon + static_cast<double>(b.cost));
  return b;
}

/// Weights for the stage-two composite; the grammar objective is mapped
/// into [0, 1] by grammar_norm before weighting.
struct CompositeConfig {
  double w1 = 1.0 / 3.0;
  double w2 = 1.0 / 3.0;
  double w3 = 1.0 / 3.0;
  double grammar_norm = 1.0;

  void validate() const {
    // Negated comparisons so NaN inputs fail rather than slip through.
    if (!(w1 >= 0) || !(w2 >= 0) || !(w3 >= 0))
      throw InvalidConfig("composite weights must be >= 0");
    if (!(std::abs(w1 + w2 + w3 - 1.0) <= 1e-12))
      throw InvalidConfig("composite weights must sum to 1");
    if (!(grammar_norm > 0)) throw InvalidConfig("grammar_norm must be > 0");
  }
};

/// Stage-two composite: w1 * norm(x1) + w2 * x2/100 + w3 * x3/100.
/// x2 and x3 are listener-model scores in [0, 100].
inline double ga2_fitness(double x1, double x2, double x3, const CompositeConfig& cfg) {
  cfg.validate();
  double norm_x1 = std::min(x1 / cfg.grammar_norm, 1.0);
  return cfg.w1 * norm_x1 + cfg.w2 * (x2 / 100.0) + cfg.w3 * (x3 / 100.0);
}

}  // namespace harmonia
