#pragma once

#include <string>
#include <tuple>
#include <vector>

#include "harmonia/corpus_index.hpp"
#include "harmonia/piece.hpp"
#include "harmonia/pianoroll.hpp"
#include "harmonia/rng.hpp"

namespace harmonia::testing {

/// Piano key index from scientific pitch, computed via the MIDI route
/// (independent of the parser's internal mapping).
inline int key_of(char letter, int octave, int accidental = 0) {
  int semitone = 0;
  switch (letter) {
    case 'C': semitone = 0; break;
    case 'D': semitone = 2; break;
    case 'E': semitone = 4; break;
    case 'F': semitone = 5; break;
    case 'G': semitone = 7; break;
    case 'A': semitone = 9; break;
    case 'B': semitone = 11; break;
  }
  return 12 * (octave + 1) + semitone + accidental - 21;
}

inline Piece make_piece(std::vector<NoteEvent> events, int span, int meter_num = 4,
                        int meter_den = 4) {
  Piece p;
  p.events = std::move(events);
  p.span_ticks = span;
  p.meter_num = meter_num;
  p.meter_den = meter_den;
  int max_voice = -1;
  for (const auto& e : p.events) max_voice = std::max(max_voice, e.voice);
  p.channels = max_voice + 1 > 0 ? max_voice + 1 : 1;
  return p;
}

/// Three hand-countable pieces; every statistic the index derives from them
/// is worked out by hand in the tests that use this corpus.
inline std::vector<Piece> toy_corpus() {
  // A: melody C4 D4 E4 C4 in quarters, one full 4/4 bar.
  Piece a = make_piece({{key_of('C', 4), 0, 16, 0},
                        {key_of('D', 4), 16, 16, 0},
                        {key_of('E', 4), 32, 16, 0},
                        {key_of('C', 4), 48, 16, 0}},
                       64);
  // B: two half-note sonorities, C major then G major.
  Piece b = make_piece({{key_of('E', 4), 0, 32, 0},
                        {key_of('C', 3), 0, 32, 1},
                        {key_of('G', 3), 0, 32, 2},
                        {key_of('D', 4), 32, 32, 0},
                        {key_of('B', 2), 32, 32, 1},
                        {key_of('G', 3), 32, 32, 2}},
                       64);
  // C: melody with one interior rest.
  Piece c = make_piece({{key_of('C', 4), 0, 16, 0},
                        {key_of('G', 4), 32, 16, 0},
                        {key_of('C', 5), 48, 16, 0}},
                       64);
  return {a, b, c};
}

/// Random chromosome respecting the column-distinct invariant.
inline Chromosome random_chromosome(Rng& rng, int channels, int steps, double density = 0.6,
                                    int pitch_lo = 27, int pitch_hi = 55) {
  Chromosome chrom(channels, steps);
  int range = pitch_hi - pitch_lo + 1;
  for (int c = 0; c < channels; ++c) {
    for (int s = 0; s < steps; ++s) {
      if (rng.next_double() >= density) continue;
      for (int attempt = 0; attempt < 32; ++attempt) {
        auto gene = static_cast<std::uint8_t>(pitch_lo + rng.next_index(range) + 1);
        bool clash = false;
        for (int o = 0; o < channels; ++o)
          if (o != c && chrom.gene(o, s) == gene) clash = true;
        if (!clash) {
          chrom.set_gene(c, s, gene);
          break;
        }
      }
    }
  }
  return chrom;
}

/// Random tune restricted to the supported ABC token subset, for round-trip
/// property tests.
inline std::string random_abc(Rng& rng, int tune_index) {
  static const char* kKeys[] = {"C", "G", "D", "F", "Bb", "Am", "Em", "Dm", "A", "Eb"};
  static const char* kDurations[] = {"", "", "2", "3", "4", "/", "/2", "3/2", "6", "8"};
  std::string out = "X:" + std::to_string(tune_index) + "\n";
  if (rng.next_bool()) out += "T:property tune " + std::to_string(tune_index) + "\n";
  out += "M:4/4\n";
  out += (rng.next_bool()) ? "L:1/8\n" : "L:1/16\n";
  out += "K:" + std::string(kKeys[rng.next_index(10)]) + "\n";

  int voices = 1 + static_cast<int>(rng.next_index(3));
  for (int v = 0; v < voices; ++v) {
    if (voices > 1) out += "V:" + std::to_string(v + 1) + "\n";
    int tokens = 10 + static_cast<int>(rng.next_index(30));
    for (int t = 0; t < tokens; ++t) {
      double roll = rng.next_double();
      if (roll < 0.08) {
        out += "| ";
        continue;
      }
      if (roll < 0.2) {
        out += "z" + std::string(kDurations[rng.next_index(10)]) + " ";
        continue;
      }
      auto note = [&]() -> std::string {
        std::string n;
        double acc = rng.next_double();
        if (acc < 0.12) n += '^';
        else if (acc < 0.24) n += '_';
        else if (acc < 0.30) n += '=';
        char letter = static_cast<char>('A' + rng.next_index(7));
        bool lower = rng.next_bool();
        n += lower ? static_cast<char>(letter + 32) : letter;
        double oct = rng.next_double();
        if (oct < 0.10) n += lower ? '\'' : ',';
        return n;
      };
      if (roll < 0.3) {  // chord: distinct letters, one shared duration
        std::string dur = kDurations[rng.next_index(10)];
        out += "[";
        int size = 2 + static_cast<int>(rng.next_index(2));
        for (int i = 0; i < size; ++i) out += note() + dur;
        out += "] ";
      } else {
        out += note() + std::string(kDurations[rng.next_index(10)]) + " ";
      }
    }
    out += "\n";
  }
  return out;
}

}  // namespace harmonia::testing
