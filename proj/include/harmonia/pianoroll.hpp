#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "harmonia/errors.hpp"
#include "harmonia/piece.hpp"
#include "harmonia/strings.hpp"

namespace harmonia {

/// 88 x T binary presence grid: cell (key, tick) = 1 iff the key sounds
/// during that tick. Stored column-major; columns are the hot axis for
/// vertical analysis and for feeding tick sequences to the listener nets.
class PianoMatrix {
 public:
  PianoMatrix() = default;
  explicit PianoMatrix(int cols) : cols_(cols), cells_(static_cast<std::size_t>(cols) * kKeyCount, 0) {}

  int rows() const { return kKeyCount; }
  int cols() const { return cols_; }

  std::uint8_t at(int row, int col) const { return cells_[idx(row, col)]; }
  void set(int row, int col, bool v) { cells_[idx(row, col)] = v ? 1 : 0; }

  const std::uint8_t* column(int col) const { return cells_.data() + static_cast<std::size_t>(col) * kKeyCount; }

  int column_sum(int col) const {
    const std::uint8_t* c = column(col);
    int n = 0;
    for (int r = 0; r < kKeyCount; ++r) n += c[r];
    return n;
  }

  /// Sounding pitches of one column, ascending.
  std::vector<int> column_pitches(int col) const {
    std::vector<int> out;
    const std::uint8_t* c = column(col);
    for (int r = 0; r < kKeyCount; ++r)
      if (c[r]) out.push_back(r);
    return out;
  }

  friend bool operator==(const PianoMatrix&, const PianoMatrix&) = default;

 private:
  std::size_t idx(int row, int col) const {
    return static_cast<std::size_t>(col) * kKeyCount + row;
  }

  int cols_ = 0;
  std::vector<std::uint8_t> cells_;
};

/// GA genotype: a channels x steps grid where each gene is 0 (silence) or
/// piano key index + 1. A held note is a run of equal consecutive genes;
/// two back-to-back same-pitch notes are indistinguishable from one long
/// note, the same ambiguity the binary matrix has.
struct Chromosome {
  int channels = 0;
  int steps = 0;
  std::vector<std::uint8_t> genes;  // row-major: genes[channel * steps + step]

  Chromosome() = default;
  Chromosome(int channels_, int steps_)
      : channels(channels_), steps(steps_),
        genes(static_cast<std::size_t>(channels_) * steps_, 0) {}

  std::uint8_t gene(int channel, int step) const {
    return genes[static_cast<std::size_t>(channel) * steps + step];
  }
  void set_gene(int channel, int step, std::uint8_t v) {
    genes[static_cast<std::size_t>(channel) * steps + step] = v;
  }

  /// Number of notes: maximal runs of equal nonzero genes, over all channels.
  int note_count() const {
    int n = 0;
    for (int c = 0; c < channels; ++c) {
      std::uint8_t prev = 0;
      for (int s = 0; s < steps; ++s) {
        std::uint8_t g = gene(c, s);
        if (g != 0 && g != prev) ++n;
        prev = g;
      }
    }
    return n;
  }

  friend bool operator==(const Chromosome&, const Chromosome&) = default;
};

// --- Conversions -------------------------------------------------------------

inline PianoMatrix piece_to_matrix(const Piece& piece) {
  PianoMatrix m(std::max(piece.span_ticks, piece.event_span()));
  for (const auto& ev : piece.events) {
    for (int t = ev.onset; t < ev.onset + ev.duration; ++t) m.set(ev.pitch, t, true);
  }
  return m;
}

inline PianoMatrix chromosome_to_matrix(const Chromosome& chrom) {
  PianoMatrix m(chrom.steps);
  for (int c = 0; c < chrom.channels; ++c) {
    for (int s = 0; s < chrom.steps; ++s) {
      std::uint8_t g = chrom.gene(c, s);
      if (g != 0) m.set(g - 1, s, true);
    }
  }
  return m;
}

/// Normalize every column to the channel convention: pitches descending,
/// channel 0 = highest (melody), silence packed into the trailing channels.
/// The phenotype matrix is unchanged; only lane assignment moves.
inline void canonicalize_channels(Chromosome& chrom) {
  std::vector<std::uint8_t> column;
  for (int s = 0; s < chrom.steps; ++s) {
    column.clear();
    for (int c = 0; c < chrom.channels; ++c)
      if (chrom.gene(c, s) != 0) column.push_back(chrom.gene(c, s));
    std::sort(column.begin(), column.end(), std::greater<>());
    for (int c = 0; c < chrom.channels; ++c)
      chrom.set_gene(c, s, c < static_cast<int>(column.size()) ? column[c] : 0);
  }
}

/// Inverse of chromosome_to_matrix up to channel assignment: pitches in a
/// column are assigned to channels in descending order, so channel 0 always
/// carries the highest (melody) voice.
inline Chromosome matrix_to_chromosome(const PianoMatrix& m, int channels) {
  Chromosome chrom(channels, m.cols());
  for (int col = 0; col < m.cols(); ++col) {
    auto pitches = m.column_pitches(col);
    if (static_cast<int>(pitches.size()) > channels)
      throw TooManyVoices(col, static_cast<int>(pitches.size()), channels);
    // Descending pitch: channel 0 = highest.
    for (std::size_t i = 0; i < pitches.size(); ++i) {
      int pitch = pitches[pitches.size() - 1 - i];
      chrom.set_gene(static_cast<int>(i), col, static_cast<std::uint8_t>(pitch + 1));
    }
  }
  return chrom;
}

/// Express a bar length in ticks as an ABC meter fraction.
inline void set_meter_from_ticks(Piece& p, int meter_ticks) {
  if (meter_ticks % 16 == 0) {
    p.meter_num = meter_ticks / 16;
    p.meter_den = 4;
  } else if (meter_ticks % 8 == 0) {
    p.meter_num = meter_ticks / 8;
    p.meter_den = 8;
  } else {
    p.meter_num = meter_ticks;
    p.meter_den = 64;
  }
}

/// Expand a chromosome into timed events (one per gene run) for export.
inline Piece chromosome_to_piece(const Chromosome& chrom, const std::string& title = "") {
  Piece p;
  p.title = title;
  p.key = "C";
  p.unit_length = {1, 8};
  p.span_ticks = chrom.steps;
  int max_voice = 0;
  for (int c = 0; c < chrom.channels; ++c) {
    int s = 0;
    while (s < chrom.steps) {
      std::uint8_t g = chrom.gene(c, s);
      if (g == 0) {
        ++s;
        continue;
      }
      int start = s;
      while (s < chrom.steps && chrom.gene(c, s) == g) ++s;
      p.events.push_back({g - 1, start, s - start, c});
      max_voice = std::max(max_voice, c);
    }
  }
  p.channels = p.events.empty() ? 1 : max_voice + 1;
  return p;
}

// --- CSV round trip ----------------------------------------------------------

/// Header `tick,k0..k87`, one row per tick, binary cells. Bit-exact.
inline void write_roll_csv(std::ostream& out, const PianoMatrix& m) {
  out << "tick";
  for (int r = 0; r < kKeyCount; ++r) out << ",k" << r;
  out << "\n";
  for (int col = 0; col < m.cols(); ++col) {
    out << col;
    for (int r = 0; r < kKeyCount; ++r) out << ',' << static_cast<int>(m.at(r, col));
    out << "\n";
  }
}

inline PianoMatrix read_roll_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("piano-roll CSV: missing header");
  std::string expected = "tick";
  for (int r = 0; r < kKeyCount; ++r) expected += ",k" + std::to_string(r);
  if (trim(line) != expected) throw DataError("piano-roll CSV: bad header row");

  std::vector<std::vector<std::uint8_t>> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto fields = split(trim(line), ',');
    if (fields.size() != static_cast<std::size_t>(kKeyCount) + 1)
      throw DataError("piano-roll CSV: row with " + std::to_string(fields.size()) + " fields");
    long long tick = require_int(fields[0], "tick");
    if (tick != static_cast<long long>(rows.size()))
      throw DataError("piano-roll CSV: out-of-order tick " + std::to_string(tick));
    std::vector<std::uint8_t> cells(kKeyCount);
    for (int r = 0; r < kKeyCount; ++r) {
      long long v = require_int(fields[r + 1], "cell");
      if (v != 0 && v != 1) throw DataError("piano-roll CSV: non-binary cell");
      cells[r] = static_cast<std::uint8_t>(v);
    }
    rows.push_back(std::move(cells));
  }
  PianoMatrix m(static_cast<int>(rows.size()));
  for (int col = 0; col < m.cols(); ++col)
    for (int r = 0; r < kKeyCount; ++r) m.set(r, col, rows[col][r] != 0);
  return m;
}

}  // namespace harmonia
