#pragma once

#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "harmonia/errors.hpp"
#include "harmonia/piece.hpp"
#include "harmonia/pitch.hpp"

namespace harmonia {
namespace abc {

namespace detail {

/// Tracks the same bar-scoped accidental state the parser keeps, so that a
/// bare letter always re-reads to the pitch we meant.
class NoteSpeller {
 public:
  explicit NoteSpeller(const KeySignature& key) : key_(key) {}

  std::string spell(int piano_key) {
    int midi = key_to_midi(piano_key);
    int octave = midi / 12 - 1;
    int semitone = midi % 12;

    char letter = 0;
    int needed_acc = 0;
    if (int nat = natural_letter(semitone); nat != 0) {
      letter = static_cast<char>(nat);
      needed_acc = 0;
    } else if (prefer_sharps()) {
      letter = static_cast<char>(natural_letter(semitone - 1));
      needed_acc = 1;
    } else {
      letter = static_cast<char>(natural_letter(semitone + 1));
      needed_acc = -1;
    }

    std::string out;
    int effective = effective_accidental(letter, octave);
    if (effective != needed_acc) {
      out += (needed_acc == 1) ? '^' : (needed_acc == -1) ? '_' : '=';
      overrides_[{letter, octave}] = needed_acc;
    }
    out += letter_text(letter, octave);
    return out;
  }

 private:
  static int natural_letter(int semitone) {
    switch (semitone) {
      case 0: return 'C';
      case 2: return 'D';
      case 4: return 'E';
      case 5: return 'F';
      case 7: return 'G';
      case 9: return 'A';
      case 11: return 'B';
    }
    return 0;
  }

  bool prefer_sharps() const {
    for (char l : {'B', 'E', 'A', 'D', 'G', 'C', 'F'})
      if (key_.accidental(l) < 0) return false;
    return true;
  }

  int effective_accidental(char letter, int octave) const {
    auto it = overrides_.find({letter, octave});
    return it != overrides_.end() ? it->second : key_.accidental(letter);
  }

  static std::string letter_text(char letter, int octave) {
    std::string s;
    if (octave >= 5) {
      s += static_cast<char>(std::tolower(static_cast<unsigned char>(letter)));
      for (int i = 5; i < octave; ++i) s += '\'';
    } else {
      s += letter;
      for (int i = octave; i < 4; ++i) s += ',';
    }
    return s;
  }

  KeySignature key_;
  std::map<std::pair<char, int>, int> overrides_;
};

inline std::string duration_text(int ticks, const Fraction& unit) {
  // ticks / (64 * unit) as a reduced rational against the L: field.
  long long num = static_cast<long long>(ticks) * unit.den;
  long long den = static_cast<long long>(kTicksPerWhole) * unit.num;
  long long g = std::gcd(num, den);
  num /= g;
  den /= g;
  if (num == 1 && den == 1) return "";
  if (den == 1) return std::to_string(num);
  if (num == 1 && den == 2) return "/";
  if (num == 1) return "/" + std::to_string(den);
  return std::to_string(num) + "/" + std::to_string(den);
}

inline std::string voice_body(const std::vector<NoteEvent>& events, int span,
                              const KeySignature& key, const Fraction& unit) {
  NoteSpeller speller(key);
  std::string out;
  int cursor = 0;
  int tokens_on_line = 0;
  auto emit = [&](const std::string& tok) {
    out += tok;
    if (++tokens_on_line >= 20) {
      out += '\n';
      tokens_on_line = 0;
    } else {
      out += ' ';
    }
  };
  for (const auto& ev : events) {
    if (ev.onset < cursor)
      throw DataError("overlapping events within one voice at tick " +
                      std::to_string(ev.onset));
    if (ev.onset > cursor) emit("z" + duration_text(ev.onset - cursor, unit));
    emit(speller.spell(ev.pitch) + duration_text(ev.duration, unit));
    cursor = ev.onset + ev.duration;
  }
  if (span > cursor) emit("z" + duration_text(span - cursor, unit));
  while (!out.empty() && (out.back() == ' ' || out.back() == '\n')) out.pop_back();
  return out;
}

}  // namespace detail

/// Serialize a Piece back to ABC. The output re-parses to an event-multiset
/// identical Piece; no interior bar lines are written, so accidental state
/// runs per voice line in both directions.
inline std::string emit(const Piece& piece) {
  KeySignature key = parse_key_signature(piece.key);
  std::string out;
  out += "X:1\n";
  if (!piece.title.empty()) out += "T:" + piece.title + "\n";
  out += "M:" + std::to_string(piece.meter_num) + "/" + std::to_string(piece.meter_den) + "\n";
  out += "L:" + std::to_string(piece.unit_length.num) + "/" +
         std::to_string(piece.unit_length.den) + "\n";
  for (const auto& h : piece.other_headers) out += h + "\n";
  out += "K:" + piece.key + "\n";

  std::vector<std::vector<NoteEvent>> lanes(std::max(piece.channels, 1));
  for (const auto& ev : piece.events) {
    if (ev.voice < 0 || ev.voice >= static_cast<int>(lanes.size()))
      throw DataError("event voice " + std::to_string(ev.voice) +
                      " outside declared channel count");
    lanes[ev.voice].push_back(ev);
  }
  for (auto& lane : lanes)
    std::sort(lane.begin(), lane.end(), [](const NoteEvent& a, const NoteEvent& b) {
      return a.onset < b.onset || (a.onset == b.onset && a.pitch < b.pitch);
    });

  bool multi = lanes.size() > 1;
  for (std::size_t v = 0; v < lanes.size(); ++v) {
    if (multi) out += "V:" + std::to_string(v + 1) + "\n";
    std::string body = detail::voice_body(lanes[v], piece.span_ticks, key, piece.unit_length);
    if (!body.empty()) out += body + "\n";
  }
  return out;
}

}  // namespace abc
}  // namespace harmonia
