#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <unordered_set>
#include <vector>

#include "harmonia/errors.hpp"
#include "harmonia/pianoroll.hpp"
#include "harmonia/piece.hpp"
#include "harmonia/rng.hpp"
#include "harmonia/strings.hpp"

namespace harmonia {

/// Symbol space for the note-occurrence distribution: piano keys 0..87 plus
/// one rest bucket.
inline constexpr int kRestSymbol = kKeyCount;
inline constexpr int kSymbolCount = kKeyCount + 1;

/// Occurrence counts n_i and their total; probabilities are always the exact
/// ratio count / total.
struct NoteDistribution {
  std::array<long long, kSymbolCount> counts{};
  long long total = 0;

  double prob(int symbol) const {
    if (total == 0) return 0.0;
    return static_cast<double>(counts[symbol]) / static_cast<double>(total);
  }

  friend bool operator==(const NoteDistribution&, const NoteDistribution&) = default;
};

namespace detail {

/// N-grams are packed 7 bits per pitch; the order is recovered from the set
/// they live in.
inline std::uint32_t encode_ngram(const int* pitches, int order) {
  std::uint32_t v = 0;
  for (int i = 0; i < order; ++i) v = (v << 7) | static_cast<std::uint32_t>(pitches[i]);
  return v;
}

inline std::vector<int> decode_ngram(std::uint32_t v, int order) {
  std::vector<int> out(order);
  for (int i = order - 1; i >= 0; --i) {
    out[i] = static_cast<int>(v & 0x7f);
    v >>= 7;
  }
  return out;
}

/// Vertical sonorities are pitch-class bitmasks; cardinality = popcount.
inline std::uint16_t pc_mask(const std::vector<int>& pitch_classes) {
  std::uint16_t m = 0;
  for (int pc : pitch_classes) m |= static_cast<std::uint16_t>(1u << pc);
  return m;
}

inline std::vector<int> mask_to_classes(std::uint16_t mask) {
  std::vector<int> out;
  for (int pc = 0; pc < 12; ++pc)
    if (mask & (1u << pc)) out.push_back(pc);
  return out;
}

}  // namespace detail

/// Statistical reference built from the human-made corpus: the
/// note distribution, melodic n-gram sets (orders 2..4) from the melody
/// lane, vertical pitch-class combinations (sizes 2..4), and the duration
/// distribution used for diagnostics.
struct CorpusIndex {
  NoteDistribution note_dist;
  std::unordered_set<std::uint32_t> ngrams[3];  // orders 2, 3, 4
  std::unordered_set<std::uint16_t> verticals;  // pc masks, popcount 2..4
  std::map<int, long long> duration_counts;
  long long total_notes = 0;  // M: notes in the database (rests excluded)
  int piece_count = 0;

  bool has_ngram(const int* pitches, int order) const {
    return ngrams[order - 2].count(detail::encode_ngram(pitches, order)) != 0;
  }
  bool has_vertical(std::uint16_t mask) const { return verticals.count(mask) != 0; }

  friend bool operator==(const CorpusIndex& a, const CorpusIndex& b) {
    return a.note_dist == b.note_dist && a.ngrams[0] == b.ngrams[0] &&
           a.ngrams[1] == b.ngrams[1] && a.ngrams[2] == b.ngrams[2] &&
           a.verticals == b.verticals && a.duration_counts == b.duration_counts &&
           a.total_notes == b.total_notes && a.piece_count == b.piece_count;
  }
};

/// Melody note sequence of a corpus piece: the onset-ordered pitches of its
/// melody events, where a melody event is one that carries the topmost
/// sounding pitch for its whole span. Repeated notes stay distinct because
/// event boundaries are known here; rests are skipped.
inline std::vector<int> piece_melody_sequence(const Piece& piece) {
  int span = piece.span_ticks;
  for (const auto& e : piece.events) span = std::max(span, e.onset + e.duration);
  std::vector<int> top(span, -1);
  for (const auto& e : piece.events)
    for (int t = e.onset; t < e.onset + e.duration; ++t) top[t] = std::max(top[t], e.pitch);

  std::vector<std::pair<int, int>> melody;  // (onset, pitch)
  for (const auto& e : piece.events) {
    bool covering = true;
    for (int t = e.onset; t < e.onset + e.duration; ++t)
      if (top[t] != e.pitch) covering = false;
    if (covering) melody.emplace_back(e.onset, e.pitch);
  }
  std::sort(melody.begin(), melody.end());
  melody.erase(std::unique(melody.begin(), melody.end()), melody.end());

  std::vector<int> out;
  out.reserve(melody.size());
  for (const auto& [onset, pitch] : melody) out.push_back(pitch);
  return out;
}

/// Melody note sequence of a chromosome: channel 0 gene runs, rests skipped.
/// The genotype has no event boundaries, so back-to-back same-pitch notes
/// read as one held note.
inline std::vector<int> melody_sequence(const Chromosome& chrom) {
  std::vector<int> out;
  std::uint8_t prev = 0;
  for (int s = 0; s < chrom.steps; ++s) {
    std::uint8_t g = chrom.gene(0, s);
    if (g != 0 && g != prev) out.push_back(g - 1);
    prev = g;
  }
  return out;
}

namespace detail {

inline void index_verticals(const PianoMatrix& m, std::unordered_set<std::uint16_t>& out) {
  for (int col = 0; col < m.cols(); ++col) {
    auto pitches = m.column_pitches(col);
    if (pitches.size() < 2) continue;
    std::uint16_t full = 0;
    for (int p : pitches) full |= static_cast<std::uint16_t>(1u << pitch_class(p));
    auto classes = mask_to_classes(full);
    int n = static_cast<int>(classes.size());
    if (n < 2) continue;  // octave doublings only
    // All subsets of sizes 2..4 of the column's pitch-class set.
    for (std::uint32_t bits = 1; bits < (1u << n); ++bits) {
      int size = __builtin_popcount(bits);
      if (size < 2 || size > 4) continue;
      std::uint16_t mask = 0;
      for (int i = 0; i < n; ++i)
        if (bits & (1u << i)) mask |= static_cast<std::uint16_t>(1u << classes[i]);
      out.insert(mask);
    }
  }
}

inline void add_piece(CorpusIndex& index, const Piece& piece) {
  PianoMatrix m = piece_to_matrix(piece);

  for (const auto& ev : piece.events) {
    ++index.note_dist.counts[ev.pitch];
    ++index.note_dist.total;
    ++index.total_notes;
    ++index.duration_counts[ev.duration];
  }

  // A rest occurrence is a maximal run of all-silent columns.
  bool in_rest = false;
  for (int col = 0; col < m.cols(); ++col) {
    bool silent = m.column_sum(col) == 0;
    if (silent && !in_rest) {
      ++index.note_dist.counts[kRestSymbol];
      ++index.note_dist.total;
    }
    in_rest = silent;
  }

  auto melody = piece_melody_sequence(piece);
  for (int order = 2; order <= 4; ++order) {
    for (std::size_t i = 0; i + order <= melody.size(); ++i)
      index.ngrams[order - 2].insert(encode_ngram(melody.data() + i, order));
  }

  index_verticals(m, index.verticals);
  ++index.piece_count;
}

}  // namespace detail

inline CorpusIndex build_index(const std::vector<Piece>& pieces) {
  if (pieces.empty()) throw EmptyCorpus("cannot index an empty corpus");
  CorpusIndex index;
  for (const auto& p : pieces) detail::add_piece(index, p);
  return index;
}

/// P(symbol) = n_i / n_total; 0 for unseen symbols.
inline double note_probability(const CorpusIndex& index, int symbol) {
  return index.note_dist.prob(symbol);
}

/// Probability of a note lasting `ticks`, over all corpus note durations.
inline double duration_probability(const CorpusIndex& index, int ticks) {
  auto it = index.duration_counts.find(ticks);
  if (it == index.duration_counts.end() || index.total_notes == 0) return 0.0;
  return static_cast<double>(it->second) / static_cast<double>(index.total_notes);
}

/// Sample a pitch-or-rest symbol proportionally to the note distribution.
inline int sample_note(const CorpusIndex& index, Rng& rng) {
  double r = rng.next_double() * static_cast<double>(index.note_dist.total);
  long long cum = 0;
  for (int s = 0; s < kSymbolCount; ++s) {
    cum += index.note_dist.counts[s];
    if (r < static_cast<double>(cum)) return s;
  }
  return kRestSymbol;
}

/// Sample a pitch conditioned on "not a rest". Requires at least one note.
inline int sample_pitch(const CorpusIndex& index, Rng& rng) {
  long long note_total = index.note_dist.total - index.note_dist.counts[kRestSymbol];
  double r = rng.next_double() * static_cast<double>(note_total);
  long long cum = 0;
  for (int s = 0; s < kKeyCount; ++s) {
    cum += index.note_dist.counts[s];
    if (r < static_cast<double>(cum)) return s;
  }
  for (int s = kKeyCount - 1; s >= 0; --s)
    if (index.note_dist.counts[s] > 0) return s;
  throw EmptyCorpus("note distribution has no pitches to sample");
}

// --- Persistence ---------------------------------------------------------

namespace detail {

inline constexpr const char* kIndexMagic = "HARMONIA-INDEX";
inline constexpr int kIndexVersion = 1;

inline std::vector<std::vector<int>> sorted_ngrams(const CorpusIndex& index, int order) {
  std::vector<std::vector<int>> out;
  for (auto v : index.ngrams[order - 2]) out.push_back(decode_ngram(v, order));
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<std::vector<int>> sorted_verticals(const CorpusIndex& index, int size) {
  std::vector<std::vector<int>> out;
  for (auto mask : index.verticals) {
    auto classes = mask_to_classes(mask);
    if (static_cast<int>(classes.size()) == size) out.push_back(std::move(classes));
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

}  // namespace detail

inline void save_index(std::ostream& out, const CorpusIndex& index) {
  out << detail::kIndexMagic << ' ' << detail::kIndexVersion << ' ' << index.total_notes
      << ' ' << index.piece_count << "\n";

  int note_lines = 0;
  for (int s = 0; s < kSymbolCount; ++s)
    if (index.note_dist.counts[s] > 0) ++note_lines;
  out << "NOTES " << note_lines << "\n";
  for (int s = 0; s < kKeyCount; ++s)
    if (index.note_dist.counts[s] > 0) out << s << ',' << index.note_dist.counts[s] << "\n";
  if (index.note_dist.counts[kRestSymbol] > 0)
    out << "rest," << index.note_dist.counts[kRestSymbol] << "\n";

  for (int order = 2; order <= 4; ++order) {
    auto grams = detail::sorted_ngrams(index, order);
    out << "NGRAMS" << order << ' ' << grams.size() << "\n";
    for (const auto& g : grams) out << detail::join_ints(g) << "\n";
  }
  for (int size = 2; size <= 4; ++size) {
    auto sets = detail::sorted_verticals(index, size);
    out << "VERT" << size << ' ' << sets.size() << "\n";
    for (const auto& s : sets) out << detail::join_ints(s) << "\n";
  }
  out << "DURS " << index.duration_counts.size() << "\n";
  for (const auto& [ticks, count] : index.duration_counts)
    out << ticks << ',' << count << "\n";
  out << "END\n";
}

inline CorpusIndex load_index(std::istream& in) {
  CorpusIndex index;
  std::string line;
  if (!std::getline(in, line)) throw DataError("index file: empty");
  {
    auto head = split(std::string(trim(line)), ' ');
    if (head.size() != 4 || head[0] != detail::kIndexMagic)
      throw DataError("index file: bad magic line");
    if (require_int(head[1], "index version") != detail::kIndexVersion)
      throw VersionMismatch("index file: version " + head[1] + ", expected " +
                            std::to_string(detail::kIndexVersion));
    index.total_notes = require_int(head[2], "total_notes");
    index.piece_count = static_cast<int>(require_int(head[3], "piece_count"));
  }

  auto read_section = [&](const std::string& name) -> long long {
    if (!std::getline(in, line)) throw DataError("index file: missing section " + name);
    auto parts = split(std::string(trim(line)), ' ');
    if (parts.size() != 2 || parts[0] != name)
      throw DataError("index file: expected section " + name + ", got '" + line + "'");
    return require_int(parts[1], name + " count");
  };

  long long notes = read_section("NOTES");
  for (long long i = 0; i < notes; ++i) {
    if (!std::getline(in, line)) throw DataError("index file: truncated NOTES");
    auto kv = split(std::string(trim(line)), ',');
    if (kv.size() != 2) throw DataError("index file: bad NOTES line '" + line + "'");
    int symbol = (kv[0] == "rest") ? kRestSymbol : static_cast<int>(require_int(kv[0], "note key"));
    if (symbol < 0 || symbol >= kSymbolCount) throw DataError("index file: note key out of range");
    long long count = require_int(kv[1], "note count");
    index.note_dist.counts[symbol] = count;
    index.note_dist.total += count;
  }
  for (int order = 2; order <= 4; ++order) {
    long long n = read_section("NGRAMS" + std::to_string(order));
    for (long long i = 0; i < n; ++i) {
      if (!std::getline(in, line)) throw DataError("index file: truncated NGRAMS");
      auto parts = split(std::string(trim(line)), ',');
      if (static_cast<int>(parts.size()) != order)
        throw DataError("index file: n-gram of wrong order '" + line + "'");
      std::vector<int> pitches;
      for (const auto& p : parts) pitches.push_back(static_cast<int>(require_int(p, "n-gram pitch")));
      index.ngrams[order - 2].insert(detail::encode_ngram(pitches.data(), order));
    }
  }
  for (int size = 2; size <= 4; ++size) {
    long long n = read_section("VERT" + std::to_string(size));
    for (long long i = 0; i < n; ++i) {
      if (!std::getline(in, line)) throw DataError("index file: truncated VERT");
      auto parts = split(std::string(trim(line)), ',');
      if (static_cast<int>(parts.size()) != size)
        throw DataError("index file: vertical set of wrong size '" + line + "'");
      std::vector<int> classes;
      for (const auto& p : parts) {
        int pc = static_cast<int>(require_int(p, "pitch class"));
        if (pc < 0 || pc > 11) throw DataError("index file: pitch class out of range");
        classes.push_back(pc);
      }
      index.verticals.insert(detail::pc_mask(classes));
    }
  }
  long long durs = read_section("DURS");
  for (long long i = 0; i < durs; ++i) {
    if (!std::getline(in, line)) throw DataError("index file: truncated DURS");
    auto kv = split(std::string(trim(line)), ',');
    if (kv.size() != 2) throw DataError("index file: bad DURS line '" + line + "'");
    index.duration_counts[static_cast<int>(require_int(kv[0], "duration ticks"))] =
        require_int(kv[1], "duration count");
  }
  if (!std::getline(in, line) || trim(line) != "END")
    throw DataError("index file: missing END marker");
  return index;
}

/// Note-probability histogram, one row per symbol.
inline void write_histogram_csv(std::ostream& out, const CorpusIndex& index) {
  out << "key,probability\n";
  for (int s = 0; s < kKeyCount; ++s)
    out << s << ',' << format_double(index.note_dist.prob(s)) << "\n";
  out << "rest," << format_double(index.note_dist.prob(kRestSymbol)) << "\n";
}

}  // namespace harmonia
