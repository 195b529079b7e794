#pragma once

#include <map>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "harmonia/errors.hpp"
#include "harmonia/piece.hpp"
#include "harmonia/pitch.hpp"
#include "harmonia/strings.hpp"

namespace harmonia {
namespace abc {

// Supported body tokens: notes A-G/a-g with accidentals (^ _ =), octave
// marks (' and ,), duration multipliers/divisors, rests (z), bar lines (|),
// bracketed chords, and V: voice switches. Everything else is rejected
// loudly; a silent misparse of corpus material is worse than an error.

namespace detail {

struct VoiceState {
  int declared_order = -1;            // first-appearance index, -1 = unused
  int cursor = 0;                     // ticks
  int max_chord = 1;                  // widest chord seen, decides lane count
  std::map<std::pair<char, int>, int> bar_accidentals;  // (letter, octave) -> acc
};

struct PendingEvent {
  int pitch;
  int onset;
  int duration;
  int declared_voice;
  int chord_slot;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Piece run() {
    parse_header();
    parse_body();
    return assemble();
  }

 private:
  // --- low-level cursor над text ---
  bool eof() const { return pos_ >= text_.size(); }
  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0';
  }
  char advance() {
    char c = text_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }
  SourcePos here() const { return {line_, col_}; }

  std::string_view current_line() {
    auto end = text_.find('\n', pos_);
    if (end == std::string_view::npos) end = text_.size();
    return text_.substr(pos_, end - pos_);
  }

  void skip_line() {
    while (!eof() && peek() != '\n') advance();
    if (!eof()) advance();
  }

  static std::string_view strip_comment(std::string_view line) {
    auto pct = line.find('%');
    if (pct != std::string_view::npos) line = line.substr(0, pct);
    return line;
  }

  // --- header ---
  // The header is the leading run of field lines; the first music line or
  // V: line starts the body. X and K must both be present.
  void parse_header() {
    bool have_x = false;
    bool have_k = false;
    while (!eof()) {
      std::string_view raw = current_line();
      std::string_view line = trim(strip_comment(raw));
      if (line.empty()) {
        skip_line();
        continue;
      }
      if (line.size() < 2 || line[1] != ':' || line[0] == 'V') break;
      char field = line[0];
      std::string_view value = trim(line.substr(2));
      skip_line();
      switch (field) {
        case 'X':
          if (!parse_int(value)) throw MalformedHeader("X: field must be an integer");
          have_x = true;
          break;
        case 'T':
          piece_.title = std::string(value);
          break;
        case 'M':
          parse_meter(value);
          break;
        case 'L':
          parse_unit_length(value);
          break;
        case 'K':
          piece_.key = std::string(value);
          key_sig_ = parse_key_signature(value);
          have_k = true;
          break;
        default:
          piece_.other_headers.emplace_back(trim(raw));
          break;
      }
    }
    if (!have_x) throw MalformedHeader("missing X: field");
    if (!have_k) throw MalformedHeader("missing K: field");
  }

  void parse_meter(std::string_view value) {
    if (value == "C") {
      piece_.meter_num = 4;
      piece_.meter_den = 4;
      return;
    }
    if (value == "C|") {
      piece_.meter_num = 2;
      piece_.meter_den = 2;
      return;
    }
    auto parts = split(value, '/');
    if (parts.size() != 2) throw MalformedHeader("M: field must be n/d, C, or C|");
    auto num = parse_int(parts[0]);
    auto den = parse_int(parts[1]);
    if (!num || !den || *num <= 0 || *den <= 0)
      throw MalformedHeader("M: field must have positive numerator and denominator");
    piece_.meter_num = static_cast<int>(*num);
    piece_.meter_den = static_cast<int>(*den);
  }

  void parse_unit_length(std::string_view value) {
    auto parts = split(value, '/');
    if (parts.size() != 2) throw MalformedHeader("L: field must be n/d");
    auto num = parse_int(parts[0]);
    auto den = parse_int(parts[1]);
    if (!num || !den || *num <= 0 || *den <= 0)
      throw MalformedHeader("L: field must have positive numerator and denominator");
    piece_.unit_length = {static_cast<int>(*num), static_cast<int>(*den)};
  }

  // --- body ---
  void parse_body() {
    current_voice_ = voice_index("");
    while (!eof()) {
      if (col_ == 1) {
        std::string_view line = trim(strip_comment(current_line()));
        if (line.size() >= 2 && line[1] == ':') {
          if (line[0] == 'V') {
            auto tag = split(std::string(trim(line.substr(2))), ' ')[0];
            current_voice_ = voice_index(tag);
            skip_line();
            continue;
          }
          throw UnsupportedToken(here(), "field line '" + std::string(line.substr(0, 2)) +
                                             "' in tune body");
        }
      }
      char c = peek();
      if (c == '\n' || c == ' ' || c == '\t' || c == '\r') {
        advance();
        continue;
      }
      if (c == '%') {
        skip_line();
        continue;
      }
      parse_token();
    }
  }

  void parse_token() {
    SourcePos pos = here();
    char c = peek();
    if (c == '|') {
      advance();
      if (peek() == ']') advance();
      bar_line();
      return;
    }
    if (c == '[') {
      if (peek(1) == '|') {  // thick bar "[|"
        advance();
        advance();
        bar_line();
        return;
      }
      parse_chord(pos);
      return;
    }
    if (c == 'z') {
      advance();
      int dur = parse_duration(pos);
      voice().cursor += dur;
      touch_voice();
      return;
    }
    if (is_note_start(c)) {
      auto [pitch, dur] = parse_note(pos);
      pending_.push_back({pitch, voice().cursor, dur, current_voice_, 0});
      voice().cursor += dur;
      touch_voice();
      return;
    }
    advance();
    throw UnsupportedToken(pos, std::string("'") + c + "'");
  }

  static bool is_letter(char c) {
    return (c >= 'A' && c <= 'G') || (c >= 'a' && c <= 'g');
  }
  static bool is_note_start(char c) {
    return is_letter(c) || c == '^' || c == '_' || c == '=';
  }

  void bar_line() { voice().bar_accidentals.clear(); }

  void parse_chord(SourcePos pos) {
    advance();  // '['
    if (!eof() && std::isalpha(static_cast<unsigned char>(peek())) && peek(1) == ':')
      throw UnsupportedToken(pos, "inline field");
    std::vector<std::pair<int, int>> notes;  // (pitch, duration)
    while (true) {
      if (eof()) throw UnsupportedToken(pos, "unterminated chord");
      char c = peek();
      if (c == ']') {
        advance();
        break;
      }
      if (c == ' ' || c == '\t') {
        advance();
        continue;
      }
      if (!is_note_start(c)) {
        SourcePos p = here();
        advance();
        throw UnsupportedToken(p, std::string("'") + c + "' inside chord");
      }
      notes.push_back(parse_note(here()));
    }
    if (std::isdigit(static_cast<unsigned char>(peek())) || peek() == '/')
      throw UnsupportedToken(here(), "duration suffix after chord bracket");
    if (notes.empty()) throw UnsupportedToken(pos, "empty chord");
    for (const auto& [p, d] : notes) {
      if (d != notes.front().second)
        throw UnsupportedToken(pos, "chord notes with unequal durations");
    }
    int onset = voice().cursor;
    for (std::size_t slot = 0; slot < notes.size(); ++slot) {
      pending_.push_back({notes[slot].first, onset, notes[slot].second, current_voice_,
                          static_cast<int>(slot)});
    }
    voice().max_chord = std::max(voice().max_chord, static_cast<int>(notes.size()));
    voice().cursor = onset + notes.front().second;
    touch_voice();
  }

  /// Note = [accidental] letter [octave marks] [duration].
  std::pair<int, int> parse_note(SourcePos pos) {
    int explicit_acc = 0;
    bool has_explicit = false;
    char c = peek();
    if (c == '^' || c == '_' || c == '=') {
      advance();
      has_explicit = true;
      explicit_acc = (c == '^') ? 1 : (c == '_') ? -1 : 0;
      if (peek() == '^' || peek() == '_')
        throw UnsupportedToken(here(), "double accidental");
      if (!is_letter(peek()))
        throw UnsupportedToken(pos, "accidental without a note letter");
    }
    char letter_raw = advance();
    char letter = static_cast<char>(std::toupper(static_cast<unsigned char>(letter_raw)));
    int octave = std::isupper(static_cast<unsigned char>(letter_raw)) ? 4 : 5;
    while (peek() == '\'' || peek() == ',') {
      octave += (advance() == '\'') ? 1 : -1;
    }

    auto& overrides = voice().bar_accidentals;
    int acc;
    if (has_explicit) {
      overrides[{letter, octave}] = explicit_acc;
      acc = explicit_acc;
    } else {
      auto it = overrides.find({letter, octave});
      acc = (it != overrides.end()) ? it->second : key_sig_.accidental(letter);
    }

    int midi = 12 * (octave + 1) + natural_semitone(letter) + acc;
    if (!is_piano_midi(midi)) throw PitchOutOfRange(pos, midi);
    int dur = parse_duration(pos);
    return {midi_to_key(midi), dur};
  }

  /// Duration suffix relative to the unit length: "", "3", "/", "//", "/2",
  /// "3/2". The result must land exactly on the tick grid.
  int parse_duration(SourcePos pos) {
    long long num = 1;
    if (std::isdigit(static_cast<unsigned char>(peek()))) num = read_digits();
    long long den = 1;
    while (peek() == '/') {
      advance();
      if (std::isdigit(static_cast<unsigned char>(peek())))
        den *= read_digits();
      else
        den *= 2;
    }
    long long ticks_num = static_cast<long long>(kTicksPerWhole) *
                          piece_.unit_length.num * num;
    long long ticks_den = static_cast<long long>(piece_.unit_length.den) * den;
    if (ticks_num % ticks_den != 0)
      throw UnsupportedToken(pos, "duration does not fit the 1/64-whole-note grid");
    long long ticks = ticks_num / ticks_den;
    if (ticks <= 0) throw UnsupportedToken(pos, "zero-length duration");
    if (ticks > 1'000'000) throw UnsupportedToken(pos, "absurdly long duration");
    return static_cast<int>(ticks);
  }

  long long read_digits() {
    long long v = 0;
    while (std::isdigit(static_cast<unsigned char>(peek()))) {
      v = v * 10 + (advance() - '0');
      if (v > 1'000'000) throw UnsupportedToken(here(), "absurdly large number");
    }
    return v;
  }

  // --- voices ---
  int voice_index(const std::string& tag) {
    for (std::size_t i = 0; i < voice_tags_.size(); ++i)
      if (voice_tags_[i] == tag) return static_cast<int>(i);
    voice_tags_.push_back(tag);
    voices_.emplace_back();
    return static_cast<int>(voices_.size()) - 1;
  }

  VoiceState& voice() { return voices_[current_voice_]; }

  void touch_voice() {
    if (voice().declared_order < 0) voice().declared_order = next_order_++;
  }

  // --- final assembly: flatten (declared voice, chord slot) into lanes ---
  Piece assemble() {
    // Lane base per declared voice, in order of first musical activity.
    std::vector<int> by_order;
    for (std::size_t i = 0; i < voices_.size(); ++i)
      if (voices_[i].declared_order >= 0) by_order.push_back(static_cast<int>(i));
    std::sort(by_order.begin(), by_order.end(), [&](int a, int b) {
      return voices_[a].declared_order < voices_[b].declared_order;
    });
    std::vector<int> lane_base(voices_.size(), 0);
    int next_base = 0;
    for (int vi : by_order) {
      lane_base[vi] = next_base;
      next_base += voices_[vi].max_chord;
    }

    int max_voice = -1;
    for (const auto& ev : pending_) {
      int lane = lane_base[ev.declared_voice] + ev.chord_slot;
      piece_.events.push_back({ev.pitch, ev.onset, ev.duration, lane});
      max_voice = std::max(max_voice, lane);
    }
    piece_.channels = max_voice + 1 > 0 ? max_voice + 1 : 1;
    int span = 0;
    for (const auto& v : voices_) span = std::max(span, v.cursor);
    piece_.span_ticks = std::max(span, piece_.event_span());
    return piece_;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;

  Piece piece_;
  KeySignature key_sig_;
  std::vector<std::string> voice_tags_;
  std::vector<VoiceState> voices_;
  std::vector<PendingEvent> pending_;
  int current_voice_ = 0;
  int next_order_ = 0;
};

}  // namespace detail

/// Parse ABC source text (one tune) into a Piece on the 1/64-whole-note grid.
inline Piece parse(std::string_view text) { return detail::Parser(text).run(); }

}  // namespace abc
}  // namespace harmonia
