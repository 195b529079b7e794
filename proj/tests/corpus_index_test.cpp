#include "harmonia/corpus_index.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "test_support/fixtures.hpp"
#include "test_support/oracles.hpp"

namespace harmonia {
namespace {

using testing::key_of;
using testing::make_piece;
using testing::toy_corpus;

std::uint16_t mask_of(std::initializer_list<int> classes) {
  std::uint16_t m = 0;
  for (int pc : classes) m |= static_cast<std::uint16_t>(1u << pc);
  return m;
}

TEST(BuildIndex, HandCountedToyCorpus) {
  CorpusIndex index = build_index(toy_corpus());

  EXPECT_EQ(index.piece_count, 3);
  EXPECT_EQ(index.total_notes, 13);
  EXPECT_EQ(index.note_dist.total, 14);  // 13 notes + 1 rest run

  EXPECT_EQ(index.note_dist.counts[key_of('C', 4)], 3);
  EXPECT_EQ(index.note_dist.counts[key_of('D', 4)], 2);
  EXPECT_EQ(index.note_dist.counts[key_of('E', 4)], 2);
  EXPECT_EQ(index.note_dist.counts[key_of('G', 3)], 2);
  EXPECT_EQ(index.note_dist.counts[key_of('B', 2)], 1);
  EXPECT_EQ(index.note_dist.counts[key_of('C', 3)], 1);
  EXPECT_EQ(index.note_dist.counts[key_of('G', 4)], 1);
  EXPECT_EQ(index.note_dist.counts[key_of('C', 5)], 1);
  EXPECT_EQ(index.note_dist.counts[kRestSymbol], 1);

  // Exactness: probability is the literal count / total ratio.
  EXPECT_EQ(note_probability(index, key_of('C', 4)), 3.0 / 14.0);
  EXPECT_EQ(note_probability(index, kRestSymbol), 1.0 / 14.0);
  EXPECT_EQ(note_probability(index, key_of('A', 0)), 0.0);

  double sum = 0.0;
  for (int s = 0; s < kSymbolCount; ++s) sum += note_probability(index, s);
  EXPECT_NEAR(sum, 1.0, 1e-12);

  EXPECT_EQ(index.ngrams[0].size(), 6u);
  EXPECT_EQ(index.ngrams[1].size(), 3u);
  EXPECT_EQ(index.ngrams[2].size(), 1u);

  int c4 = key_of('C', 4), d4 = key_of('D', 4), e4 = key_of('E', 4);
  int pair1[2] = {c4, d4};
  EXPECT_TRUE(index.has_ngram(pair1, 2));
  int pair2[2] = {e4, c4};
  EXPECT_TRUE(index.has_ngram(pair2, 2));
  int pair3[2] = {d4, c4};
  EXPECT_FALSE(index.has_ngram(pair3, 2));
  int tri[3] = {c4, d4, e4};
  EXPECT_TRUE(index.has_ngram(tri, 3));
  int four[4] = {c4, d4, e4, c4};
  EXPECT_TRUE(index.has_ngram(four, 4));

  EXPECT_EQ(index.verticals.size(), 8u);
  for (auto want : {mask_of({0, 4}), mask_of({0, 7}), mask_of({4, 7}), mask_of({0, 4, 7}),
                    mask_of({2, 7}), mask_of({2, 11}), mask_of({7, 11}), mask_of({2, 7, 11})})
    EXPECT_TRUE(index.has_vertical(want));
  EXPECT_FALSE(index.has_vertical(mask_of({0, 1})));

  EXPECT_EQ(index.duration_counts.at(16), 7);
  EXPECT_EQ(index.duration_counts.at(32), 6);
  EXPECT_EQ(duration_probability(index, 16), 7.0 / 13.0);
  EXPECT_EQ(duration_probability(index, 32), 6.0 / 13.0);
  EXPECT_EQ(duration_probability(index, 99), 0.0);
}

TEST(BuildIndex, RepeatedMelodyNotesStayDistinctInNgrams) {
  // One piece, melody C C G: two back-to-back C events are separate notes.
  Piece p = make_piece({{key_of('C', 4), 0, 16, 0},
                        {key_of('C', 4), 16, 16, 0},
                        {key_of('G', 4), 32, 16, 0}},
                       48);
  CorpusIndex index = build_index({p});

  EXPECT_EQ(index.note_dist.counts[key_of('C', 4)], 2);
  EXPECT_EQ(index.note_dist.counts[key_of('G', 4)], 1);
  EXPECT_EQ(note_probability(index, key_of('C', 4)), 2.0 / 3.0);
  EXPECT_EQ(note_probability(index, key_of('G', 4)), 1.0 / 3.0);

  int cc[2] = {key_of('C', 4), key_of('C', 4)};
  int cg[2] = {key_of('C', 4), key_of('G', 4)};
  EXPECT_TRUE(index.has_ngram(cc, 2));
  EXPECT_TRUE(index.has_ngram(cg, 2));
  EXPECT_EQ(index.ngrams[0].size(), 2u);
  int ccg[3] = {key_of('C', 4), key_of('C', 4), key_of('G', 4)};
  EXPECT_TRUE(index.has_ngram(ccg, 3));
  EXPECT_EQ(index.ngrams[1].size(), 1u);
  EXPECT_TRUE(index.ngrams[2].empty());
}

TEST(BuildIndex, EmptyCorpusIsAnError) {
  EXPECT_THROW(build_index({}), EmptyCorpus);
}

TEST(BuildIndex, AddingAPieceNeverRemovesAnything) {
  auto pieces = toy_corpus();
  CorpusIndex small = build_index({pieces[0], pieces[1]});
  CorpusIndex big = build_index(pieces);

  for (int order = 0; order < 3; ++order)
    for (auto gram : small.ngrams[order]) EXPECT_TRUE(big.ngrams[order].count(gram));
  for (auto mask : small.verticals) EXPECT_TRUE(big.verticals.count(mask));
  for (int s = 0; s < kSymbolCount; ++s)
    EXPECT_GE(big.note_dist.counts[s], small.note_dist.counts[s]);
  EXPECT_GE(big.total_notes, small.total_notes);
}

TEST(BuildIndex, IndexedNgramsOccurVerbatimInSomePiece) {
  auto pieces = toy_corpus();
  CorpusIndex index = build_index(pieces);

  std::vector<std::vector<int>> melodies;
  for (const auto& p : pieces) melodies.push_back(testing::brute_piece_melody(p));

  for (int order = 2; order <= 4; ++order) {
    for (auto encoded : index.ngrams[order - 2]) {
      auto gram = detail::decode_ngram(encoded, order);
      bool found = false;
      for (const auto& melody : melodies) {
        for (std::size_t i = 0; i + order <= melody.size(); ++i) {
          bool equal = true;
          for (int k = 0; k < order; ++k)
            if (melody[i + k] != gram[k]) equal = false;
          if (equal) found = true;
        }
      }
      EXPECT_TRUE(found) << "order " << order;
    }
  }
}

TEST(SampleNote, DegenerateDistributionAlwaysReturnsTheKey) {
  Piece p = make_piece({{40, 0, 8, 0}, {40, 8, 8, 0}}, 16);
  CorpusIndex index = build_index({p});
  Rng rng(1);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_note(index, rng), 40);
}

TEST(SampleNote, FixedSeedReproduces) {
  CorpusIndex index = build_index(toy_corpus());
  Rng a(42), b(42);
  for (int i = 0; i < 200; ++i) EXPECT_EQ(sample_note(index, a), sample_note(index, b));
}

TEST(SampleNote, EmpiricalFrequencyMatchesDistribution) {
  CorpusIndex index = build_index(toy_corpus());
  Rng rng(20240817);
  const int kDraws = 100000;
  std::array<int, kSymbolCount> hits{};
  for (int i = 0; i < kDraws; ++i) ++hits[sample_note(index, rng)];

  for (int s = 0; s < kSymbolCount; ++s) {
    double p = note_probability(index, s);
    double se = std::sqrt(p * (1.0 - p) / kDraws);
    double freq = static_cast<double>(hits[s]) / kDraws;
    if (p == 0.0) {
      EXPECT_EQ(hits[s], 0) << "symbol " << s;
    } else {
      EXPECT_NEAR(freq, p, 3.0 * se) << "symbol " << s;
    }
  }
}

TEST(SamplePitch, NeverReturnsARest) {
  CorpusIndex index = build_index(toy_corpus());
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    int s = sample_pitch(index, rng);
    EXPECT_GE(s, 0);
    EXPECT_LT(s, kKeyCount);
    EXPECT_GT(index.note_dist.counts[s], 0);
  }
}

TEST(Persistence, SaveLoadIsExact) {
  CorpusIndex index = build_index(toy_corpus());
  std::ostringstream out;
  save_index(out, index);

  std::istringstream in(out.str());
  CorpusIndex back = load_index(in);
  EXPECT_TRUE(back == index);

  std::ostringstream out2;
  save_index(out2, back);
  EXPECT_EQ(out2.str(), out.str());
}

TEST(Persistence, TruncatedAndCorruptFilesAreLoud) {
  CorpusIndex index = build_index(toy_corpus());
  std::ostringstream out;
  save_index(out, index);
  std::string text = out.str();

  std::istringstream truncated(text.substr(0, text.size() / 2));
  EXPECT_THROW(load_index(truncated), DataError);

  std::istringstream empty("");
  EXPECT_THROW(load_index(empty), DataError);

  std::istringstream bad_magic("NOT-AN-INDEX 1 0 0\n");
  EXPECT_THROW(load_index(bad_magic), DataError);
}

TEST(Histogram, ProbabilitiesSumToOne) {
  CorpusIndex index = build_index(toy_corpus());
  std::ostringstream out;
  write_histogram_csv(out, index);

  std::istringstream in(out.str());
  std::string line;
  ASSERT_TRUE(std::getline(in, line));
  EXPECT_EQ(line, "key,probability");
  double sum = 0.0;
  int rows = 0;
  while (std::getline(in, line)) {
    auto fields = split(line, ',');
    ASSERT_EQ(fields.size(), 2u);
    sum += *parse_double(fields[1]);
    ++rows;
  }
  EXPECT_EQ(rows, kSymbolCount);
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

}  // namespace
}  // namespace harmonia
