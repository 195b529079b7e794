#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "harmonia/pitch.hpp"

namespace harmonia {

// The time grid: 1 tick = 1/64 of a whole note.
inline constexpr int kTicksPerWhole = 64;

/// One sounding note on the tick grid.
struct NoteEvent {
  int pitch = 0;     // piano key index, 0 = A0 .. 87 = C8
  int onset = 0;     // ticks, >= 0
  int duration = 1;  // ticks, >= 1
  int voice = 0;     // channel lane, >= 0

  friend bool operator==(const NoteEvent&, const NoteEvent&) = default;
  friend auto operator<=>(const NoteEvent&, const NoteEvent&) = default;
};

/// A positive rational, used for the default note length (L: field).
struct Fraction {
  int num = 1;
  int den = 8;

  friend bool operator==(const Fraction&, const Fraction&) = default;
};

/// A whole tune: timed note events plus the header metadata needed to
/// serialize it back to ABC.
struct Piece {
  std::vector<NoteEvent> events;
  int meter_num = 4;
  int meter_den = 4;
  Fraction unit_length{1, 8};
  std::string key = "C";
  std::string title;
  int channels = 1;    // 1 + max voice index present
  int span_ticks = 0;  // covers trailing rests beyond the last event

  /// Preserved verbatim on round-trip (header lines we do not interpret).
  std::vector<std::string> other_headers;

  int ticks_per_bar() const { return kTicksPerWhole * meter_num / meter_den; }

  /// Last sounding tick + 1, ignoring trailing rests.
  int event_span() const {
    int end = 0;
    for (const auto& e : events) end = std::max(end, e.onset + e.duration);
    return end;
  }
};

/// Sorted copy of the events, for multiset comparisons in tests and
/// canonical serialization order.
inline std::vector<NoteEvent> sorted_events(const Piece& p) {
  auto evs = p.events;
  std::sort(evs.begin(), evs.end());
  return evs;
}

}  // namespace harmonia
