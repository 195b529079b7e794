#pragma once

#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>

#include "harmonia/errors.hpp"
#include "harmonia/strings.hpp"

namespace harmonia {

// Piano key indices: 0 = A0 (MIDI 21) .. 87 = C8 (MIDI 108).
inline constexpr int kKeyCount = 88;
inline constexpr int kLowestMidi = 21;
inline constexpr int kHighestMidi = 108;
inline constexpr int kMiddleCKey = 39;  // C4, MIDI 60

constexpr bool is_piano_midi(int midi) {
  return midi >= kLowestMidi && midi <= kHighestMidi;
}

constexpr int midi_to_key(int midi) { return midi - kLowestMidi; }
constexpr int key_to_midi(int key) { return key + kLowestMidi; }

constexpr int pitch_class(int key) { return key_to_midi(key) % 12; }

/// Semitone of each natural letter within an octave (C = 0).
constexpr int natural_semitone(char letter) {
  switch (letter) {
    case 'C': return 0;
    case 'D': return 2;
    case 'E': return 4;
    case 'F': return 5;
    case 'G': return 7;
    case 'A': return 9;
    case 'B': return 11;
  }
  return -1;
}

/// A key signature reduced to its per-letter default accidental
/// (-1 flat, 0 natural, +1 sharp).
struct KeySignature {
  std::string name;  // original text, e.g. "D", "Am", "Ador"
  std::array<int, 7> accidental_of_letter{};  // indexed by letter - 'A'

  int accidental(char letter) const { return accidental_of_letter[letter - 'A']; }
};

namespace detail {

// Sharp count of a major key per circle of fifths; '#' adds 7, 'b' removes 7,
// and a mode shifts by its brightness offset relative to ionian.
inline std::optional<int> mode_shift(std::string_view mode) {
  std::string m;
  for (char c : mode) m += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (m.empty() || m.rfind("maj", 0) == 0 || m.rfind("ion", 0) == 0) return 0;
  if (m == "m" || m.rfind("min", 0) == 0 || m.rfind("aeo", 0) == 0) return -3;
  if (m.rfind("dor", 0) == 0) return -2;
  if (m.rfind("phr", 0) == 0) return -4;
  if (m.rfind("lyd", 0) == 0) return 1;
  if (m.rfind("mix", 0) == 0) return -1;
  if (m.rfind("loc", 0) == 0) return -5;
  return std::nullopt;
}

inline int major_sharps(char letter) {
  switch (letter) {
    case 'C': return 0;
    case 'D': return 2;
    case 'E': return 4;
    case 'F': return -1;
    case 'G': return 1;
    case 'A': return 3;
    case 'B': return 5;
  }
  return 0;
}

}  // namespace detail

/// Parse an ABC key field value ("C", "Am", "F#m", "Bb", "D mixolydian",
/// "none", ...) into a per-letter accidental map.
inline KeySignature parse_key_signature(std::string_view text) {
  KeySignature sig;
  sig.name = std::string(trim(text));
  std::string_view v = trim(text);
  if (v.empty()) throw MalformedHeader("empty K: field");

  std::string lower;
  for (char c : v) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "none") return sig;  // all naturals

  char letter = static_cast<char>(std::toupper(static_cast<unsigned char>(v[0])));
  if (letter < 'A' || letter > 'G')
    throw MalformedHeader("unsupported key signature '" + sig.name + "'");
  std::size_t i = 1;
  int sharps = detail::major_sharps(letter);
  if (i < v.size() && (v[i] == '#' || v[i] == 'b')) {
    sharps += (v[i] == '#') ? 7 : -7;
    ++i;
  }
  auto shift = detail::mode_shift(trim(v.substr(i)));
  if (!shift) throw MalformedHeader("unsupported key mode in '" + sig.name + "'");
  sharps += *shift;
  if (sharps < -7 || sharps > 7)
    throw MalformedHeader("key signature '" + sig.name + "' is outside the circle of fifths");

  static constexpr char kSharpOrder[] = {'F', 'C', 'G', 'D', 'A', 'E', 'B'};
  static constexpr char kFlatOrder[] = {'B', 'E', 'A', 'D', 'G', 'C', 'F'};
  if (sharps > 0) {
    for (int k = 0; k < sharps; ++k) sig.accidental_of_letter[kSharpOrder[k] - 'A'] = 1;
  } else {
    for (int k = 0; k < -sharps; ++k) sig.accidental_of_letter[kFlatOrder[k] - 'A'] = -1;
  }
  return sig;
}

}  // namespace harmonia
