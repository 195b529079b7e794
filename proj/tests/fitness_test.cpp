#include "harmonia/fitness.hpp"

#include <gtest/gtest.h>

#include "test_support/fixtures.hpp"
#include "test_support/oracles.hpp"

namespace harmonia {
namespace {

using testing::brute_build;
using testing::brute_similarity;
using testing::brute_violations;
using testing::key_of;
using testing::make_piece;
using testing::toy_corpus;

// Genes for a one-note-per-step melody on channel 0.
Chromosome melody_chromosome(const std::vector<int>& pitches, int steps) {
  Chromosome chrom(1, steps);
  for (std::size_t i = 0; i < pitches.size(); ++i)
    chrom.set_gene(0, static_cast<int>(i), static_cast<std::uint8_t>(pitches[i] + 1));
  return chrom;
}

/// Corpus with exactly ten notes, a known bigram list, and no verticals.
std::vector<Piece> ten_note_corpus() {
  std::vector<NoteEvent> events;
  for (int i = 0; i < 10; ++i) events.push_back({39 + 2 * i, i * 8, 8, 0});
  return {make_piece(events, 80)};
}

TEST(CountViolations, SilenceIsVacuouslyClean) {
  CorpusIndex index = build_index(toy_corpus());
  RuleConfig rules;
  rules.meter_ticks = 16;
  Chromosome chrom(2, 32);  // two complete bars of silence
  ViolationCounts counts = count_violations(chrom, index, rules);
  EXPECT_EQ(counts.total(), 0);
}

TEST(CountViolations, ThirteenSemitoneLeap) {
  CorpusIndex index = build_index(toy_corpus());
  RuleConfig rules;
  rules.meter_ticks = 2;
  rules.penalize_unseen_transition = false;
  Chromosome chrom = melody_chromosome({39, 52}, 2);
  ViolationCounts counts = count_violations(chrom, index, rules);
  EXPECT_EQ(counts.melodic, 1);
  EXPECT_EQ(counts.rhythm, 0);
  EXPECT_EQ(counts.harmony, 0);
}

TEST(CountViolations, TritoneLeapToggle) {
  CorpusIndex index = build_index(toy_corpus());
  RuleConfig rules;
  rules.meter_ticks = 2;
  rules.penalize_unseen_transition = false;
  Chromosome chrom = melody_chromosome({39, 45}, 2);  // C4 -> F#4
  EXPECT_EQ(count_violations(chrom, index, rules).melodic, 1);
  rules.forbid_tritone_leap = false;
  EXPECT_EQ(count_violations(chrom, index, rules).melodic, 0);
}

TEST(CountViolations, RhythmBarBoundaryAndIncompleteBar) {
  CorpusIndex index = build_index(toy_corpus());
  RuleConfig rules;
  rules.meter_ticks = 4;
  rules.penalize_unseen_transition = false;

  // One melody note held across the bar line at t=4.
  Chromosome crossing(1, 8);
  for (int s = 2; s < 6; ++s) crossing.set_gene(0, s, 40);
  EXPECT_EQ(count_violations(crossing, index, rules).rhythm, 1);

  // Aligned notes, no crossing.
  Chromosome aligned(1, 8);
  for (int s = 0; s < 4; ++s) aligned.set_gene(0, s, 40);
  for (int s = 4; s < 8; ++s) aligned.set_gene(0, s, 42);
  EXPECT_EQ(count_violations(aligned, index, rules).rhythm, 0);

  // Six steps at meter four: the final bar is incomplete.
  Chromosome incomplete(1, 6);
  EXPECT_EQ(count_violations(incomplete, index, rules).rhythm, 1);
}

TEST(CountViolations, HarmonyPolicyDistinguishesTriadsAndCorpus) {
  CorpusIndex index = build_index(toy_corpus());
  RuleConfig rules;
  rules.meter_ticks = 1;
  rules.penalize_unseen_transition = false;

  // C4 + F#4 in one column: a tritone, in no triad and not in the corpus.
  Chromosome tritone(2, 1);
  tritone.set_gene(0, 0, 40);
  tritone.set_gene(1, 0, 46);
  EXPECT_EQ(count_violations(tritone, index, rules).harmony, 1);

  // C4 + E4: subset of the C major triad and corpus-attested.
  Chromosome third(2, 1);
  third.set_gene(0, 0, 40);
  third.set_gene(1, 0, 44);
  EXPECT_EQ(count_violations(third, index, rules).harmony, 0);

  // D4 + F4: subset of the D minor triad but absent from the toy corpus.
  Chromosome minor_third(2, 1);
  minor_third.set_gene(0, 0, 42);
  minor_third.set_gene(1, 0, 45);
  rules.allowed_vertical = VerticalPolicy::kCorpusOnly;
  EXPECT_EQ(count_violations(minor_third, index, rules).harmony, 1);
  rules.allowed_vertical = VerticalPolicy::kTriadOnly;
  EXPECT_EQ(count_violations(minor_third, index, rules).harmony, 0);
  rules.allowed_vertical = VerticalPolicy::kCorpusOrTriad;
  EXPECT_EQ(count_violations(minor_third, index, rules).harmony, 0);

  // Octave doubling alone is never a violation.
  Chromosome octave(2, 1);
  octave.set_gene(0, 0, 40);
  octave.set_gene(1, 0, 52);
  rules.allowed_vertical = VerticalPolicy::kCorpusOnly;
  EXPECT_EQ(count_violations(octave, index, rules).harmony, 0);
}

TEST(CountViolations, UnseenTransitions) {
  CorpusIndex index = build_index(toy_corpus());
  RuleConfig rules;
  rules.meter_ticks = 4;
  // Toy corpus has (C4,D4) but not (D4,C4).
  Chromosome chrom = melody_chromosome({key_of('C', 4), key_of('D', 4), key_of('C', 4)}, 4);
  EXPECT_EQ(count_violations(chrom, index, rules).transition, 1);
  rules.penalize_unseen_transition = false;
  EXPECT_EQ(count_violations(chrom, index, rules).transition, 0);
}

TEST(CountViolations, MatchesBruteForceOnRandomChromosomes) {
  auto pieces = toy_corpus();
  CorpusIndex index = build_index(pieces);
  auto brute_corpus = brute_build(pieces);

  RuleConfig rules;
  rules.meter_ticks = 4;
  Rng rng(101);
  for (int trial = 0; trial < 40; ++trial) {
    int channels = 1 + static_cast<int>(rng.next_index(3));
    int steps = 4 + static_cast<int>(rng.next_index(13));
    Chromosome chrom = testing::random_chromosome(rng, channels, steps, 0.7);
    ViolationCounts got = count_violations(chrom, index, rules);
    auto want = brute_violations(chrom, brute_corpus, rules.max_melodic_leap,
                                 rules.forbid_tritone_leap, rules.meter_ticks,
                                 rules.penalize_unseen_transition);
    EXPECT_EQ(got.rhythm, want.rhythm) << "trial " << trial;
    EXPECT_EQ(got.melodic, want.melodic) << "trial " << trial;
    EXPECT_EQ(got.transition, want.transition) << "trial " << trial;
    // Brute harmony uses corpus-or-triad, the default policy.
    EXPECT_EQ(got.harmony, want.harmony) << "trial " << trial;
  }
}

TEST(SimilarityScore, NoSharedMaterialScoresZero) {
  CorpusIndex index = build_index(toy_corpus());
  Chromosome chrom = melody_chromosome({0, 2, 4}, 4);  // lowest piano keys
  auto sim = similarity_score(chrom, index);
  EXPECT_EQ(sim.n2 + sim.n3 + sim.n4 + sim.s2 + sim.s3 + sim.s4, 0);
  EXPECT_EQ(sim.score, 0.0);
}

TEST(SimilarityScore, DirectSubstitutionIntoTheFormula) {
  // Corpus: M = 10. Chromosome: L = 5 with exactly one matching bigram.
  CorpusIndex index = build_index(ten_note_corpus());
  ASSERT_EQ(index.total_notes, 10);

  // Melody (39, 41) matches; everything after is corpus-foreign.
  Chromosome chrom = melody_chromosome({39, 41, 60, 62, 60}, 5);
  auto sim = similarity_score(chrom, index);
  EXPECT_EQ(sim.l, 5);
  EXPECT_EQ(sim.n2, 1);
  EXPECT_EQ(sim.n3 + sim.n4 + sim.s2 + sim.s3 + sim.s4, 0);
  EXPECT_EQ(sim.score, 1.0 / 50.0);
  EXPECT_NEAR(sim.score, 0.02, 1e-12);
}

TEST(SimilarityScore, MatchesBruteForceOnRandomChromosomes) {
  auto pieces = toy_corpus();
  CorpusIndex index = build_index(pieces);
  auto brute_corpus = brute_build(pieces);
  ASSERT_EQ(brute_corpus.note_count, index.total_notes);

  Rng rng(202);
  for (int trial = 0; trial < 40; ++trial) {
    int channels = 1 + static_cast<int>(rng.next_index(3));
    int steps = 4 + static_cast<int>(rng.next_index(13));
    Chromosome chrom = testing::random_chromosome(rng, channels, steps, 0.7);
    auto got = similarity_score(chrom, index);
    auto want = brute_similarity(chrom, brute_corpus);
    EXPECT_EQ(got.n2, want.n2) << "trial " << trial;
    EXPECT_EQ(got.n3, want.n3) << "trial " << trial;
    EXPECT_EQ(got.n4, want.n4) << "trial " << trial;
    EXPECT_EQ(got.s2, want.s2) << "trial " << trial;
    EXPECT_EQ(got.s3, want.s3) << "trial " << trial;
    EXPECT_EQ(got.s4, want.s4) << "trial " << trial;
    EXPECT_EQ(got.l, want.l) << "trial " << trial;
    EXPECT_NEAR(got.score, want.score, 1e-12) << "trial " << trial;
  }
}

TEST(SimilarityScore, InvariantUnderNonMelodyChannelPermutation) {
  CorpusIndex index = build_index(toy_corpus());
  Rng rng(303);
  for (int trial = 0; trial < 20; ++trial) {
    Chromosome chrom = testing::random_chromosome(rng, 3, 12, 0.7);
    Chromosome swapped = chrom;
    for (int s = 0; s < chrom.steps; ++s) {
      swapped.set_gene(1, s, chrom.gene(2, s));
      swapped.set_gene(2, s, chrom.gene(1, s));
    }
    auto a = similarity_score(chrom, index);
    auto b = similarity_score(swapped, index);
    EXPECT_EQ(a, b) << "trial " << trial;
  }
}

TEST(SimilarityScore, VerticalAndEdgeMelodyRemovalIsMonotone) {
  CorpusIndex index = build_index(toy_corpus());
  Rng rng(404);
  for (int trial = 0; trial < 30; ++trial) {
    Chromosome chrom = testing::random_chromosome(rng, 3, 12, 0.8);
    auto before = similarity_score(chrom, index);

    // Remove one run from a non-melody channel: S counts cannot grow.
    Chromosome removed = chrom;
    int channel = 1 + static_cast<int>(rng.next_index(2));
    int s = 0;
    while (s < removed.steps && removed.gene(channel, s) == 0) ++s;
    if (s < removed.steps) {
      std::uint8_t g = removed.gene(channel, s);
      while (s < removed.steps && removed.gene(channel, s) == g) removed.set_gene(channel, s++, 0);
    }
    auto after = similarity_score(removed, index);
    EXPECT_LE(after.s2, before.s2);
    EXPECT_LE(after.s3, before.s3);
    EXPECT_LE(after.s4, before.s4);
    EXPECT_EQ(after.n2, before.n2);  // melody untouched

    // Remove the final melody run: N counts cannot grow.
    Chromosome trimmed = chrom;
    int end = trimmed.steps - 1;
    while (end >= 0 && trimmed.gene(0, end) == 0) --end;
    if (end >= 0) {
      std::uint8_t g = trimmed.gene(0, end);
      while (end >= 0 && trimmed.gene(0, end) == g) trimmed.set_gene(0, end--, 0);
    }
    auto trimmed_sim = similarity_score(trimmed, index);
    EXPECT_LE(trimmed_sim.n2, before.n2);
    EXPECT_LE(trimmed_sim.n3, before.n3);
    EXPECT_LE(trimmed_sim.n4, before.n4);
  }
}

TEST(Ga1Objective, ZeroCostGivesScorePlusOne) {
  CorpusIndex index = build_index(toy_corpus());
  RuleConfig rules;
  rules.meter_ticks = 16;
  Chromosome silent(1, 16);
  FitnessBreakdown b = ga1_objective(silent, index, rules, 0.001);
  EXPECT_EQ(b.cost, 0);
  EXPECT_EQ(b.score, 0.0);
  EXPECT_EQ(b.objective, 1.0);
  EXPECT_EQ(b.m, index.total_notes);
}

TEST(Ga1Objective, NineViolationsAtEpsilonOne) {
  CorpusIndex index = build_index(toy_corpus());
  RuleConfig rules;
  rules.meter_ticks = 16;
  rules.penalize_unseen_transition = false;
  // Ten single-tick notes alternating a 13-semitone leap: nine violations.
  std::vector<int> pitches;
  for (int i = 0; i < 10; ++i) pitches.push_back(i % 2 == 0 ? 30 : 43);
  Chromosome chrom = melody_chromosome(pitches, 16);
  FitnessBreakdown b = ga1_objective(chrom, index, rules, 1.0);
  EXPECT_EQ(b.cost, 9);
  EXPECT_EQ(b.score, 0.0);
  EXPECT_NEAR(b.objective, 0.1, 1e-15);
}

TEST(Ga1Objective, FormulaHoldsBitExactOnArbitraryInputs) {
  CorpusIndex index = build_index(toy_corpus());
  RuleConfig rules;
  rules.meter_ticks = 4;
  Rng rng(505);
  for (int trial = 0; trial < 50; ++trial) {
    Chromosome chrom = testing::random_chromosome(rng, 2, 12, 0.6);
    FitnessBreakdown b = ga1_objective(chrom, index, rules, 0.001);
    EXPECT_EQ(b.objective, b.score + 0.001 / (0.001 + static_cast<double>(b.cost)));
    EXPECT_EQ(b.cost, b.violations.total());
    EXPECT_GE(b.score, 0.0);
  }
}

TEST(Ga1Objective, TransitionViolationsWithTinyEpsilon) {
  CorpusIndex index = build_index(ten_note_corpus());
  RuleConfig rules;
  rules.meter_ticks = 5;
  // (39,41) attested; the remaining three adjacent pairs are unseen.
  Chromosome chrom = melody_chromosome({39, 41, 43, 44, 43}, 5);
  FitnessBreakdown b = ga1_objective(chrom, index, rules, 0.001);
  // (41,43) is in the corpus; (43,44), (44,43) are not -> check the counts.
  EXPECT_EQ(b.violations.transition, 2);
  EXPECT_EQ(b.violations.melodic, 0);
  EXPECT_EQ(b.objective, b.score + 0.001 / (0.001 + static_cast<double>(b.cost)));
}

TEST(Ga1Objective, DecreasingInCostIncreasingInScore) {
  CorpusIndex index = build_index(toy_corpus());
  RuleConfig rules;
  rules.meter_ticks = 16;
  rules.penalize_unseen_transition = false;

  auto with_leaps = [&](int notes) {
    std::vector<int> pitches;
    for (int i = 0; i < notes; ++i) pitches.push_back(i % 2 == 0 ? 30 : 43);
    return ga1_objective(melody_chromosome(pitches, 16), index, rules, 0.001);
  };
  FitnessBreakdown three = with_leaps(4);
  FitnessBreakdown five = with_leaps(6);
  ASSERT_EQ(three.score, five.score);  // both zero
  ASSERT_LT(three.cost, five.cost);
  EXPECT_GT(three.objective, five.objective);

  EXPECT_THROW(ga1_objective(Chromosome(1, 4), index, rules, 0.0), InvalidConfig);
}

TEST(Ga2Fitness, WeightedSubstitution) {
  CompositeConfig cfg;
  cfg.grammar_norm = 1.0;
  EXPECT_NEAR(ga2_fitness(0.9, 60.0, 30.0, cfg), 0.6, 1e-12);
}

TEST(Ga2Fitness, AllObjectivesAtMaximum) {
  CompositeConfig cfg;
  cfg.grammar_norm = 2.0;
  EXPECT_NEAR(ga2_fitness(5.0, 100.0, 100.0, cfg), 1.0, 1e-12);
}

TEST(Ga2Fitness, DegenerateWeightsFollowGrammarOnly) {
  CompositeConfig cfg;
  cfg.w1 = 1.0;
  cfg.w2 = 0.0;
  cfg.w3 = 0.0;
  cfg.grammar_norm = 1024.0;
  std::vector<double> x1s = {0.3, 1.9, 0.7, 1.2};
  std::size_t best = 0;
  for (std::size_t i = 1; i < x1s.size(); ++i)
    if (ga2_fitness(x1s[i], 0.0, 100.0, cfg) > ga2_fitness(x1s[best], 0.0, 100.0, cfg)) best = i;
  EXPECT_EQ(best, 1u);
}

TEST(Ga2Fitness, StaysInUnitIntervalAndValidates) {
  CompositeConfig cfg;
  cfg.grammar_norm = 3.0;
  Rng rng(606);
  for (int i = 0; i < 200; ++i) {
    double x1 = rng.next_double() * 10.0;
    double x2 = rng.next_double() * 100.0;
    double x3 = rng.next_double() * 100.0;
    double f = ga2_fitness(x1, x2, x3, cfg);
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, 1.0);
  }

  CompositeConfig bad;
  bad.w1 = 0.5;
  bad.w2 = 0.5;
  bad.w3 = 0.5;
  EXPECT_THROW(ga2_fitness(1.0, 1.0, 1.0, bad), InvalidConfig);
  CompositeConfig negative;
  negative.w1 = -0.5;
  negative.w2 = 1.0;
  negative.w3 = 0.5;
  EXPECT_THROW(ga2_fitness(1.0, 1.0, 1.0, negative), InvalidConfig);
}

TEST(Breakdown, CsvRowHasAllFields) {
  CorpusIndex index = build_index(toy_corpus());
  RuleConfig rules;
  rules.meter_ticks = 4;
  Chromosome chrom = melody_chromosome({39, 41}, 4);
  FitnessBreakdown b = ga1_objective(chrom, index, rules, 0.001);
  auto header_fields = split(FitnessBreakdown::csv_header(), ',');
  auto row_fields = split(b.csv_row(), ',');
  EXPECT_EQ(header_fields.size(), row_fields.size());
  EXPECT_EQ(*parse_double(row_fields[0]), b.score);
}

}  // namespace
}  // namespace harmonia
