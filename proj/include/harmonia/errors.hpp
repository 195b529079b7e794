#pragma once

#include <stdexcept>
#include <string>

namespace harmonia {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Bad or inconsistent configuration (maps to exit code 1 in the CLI).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

/// Malformed or out-of-contract input data (maps to exit code 2 in the CLI).
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(what) {}
};

// --- ABC parsing -----------------------------------------------------------

struct SourcePos {
  int line = 0;  // 1-based
  int column = 0;  // 1-based

  std::string str() const {
    return "line " + std::to_string(line) + ", column " + std::to_string(column);
  }
};

class UnsupportedToken : public DataError {
 public:
  UnsupportedToken(SourcePos pos, const std::string& what)
      : DataError("unsupported token at " + pos.str() + ": " + what), pos_(pos) {}
  SourcePos pos() const { return pos_; }

 private:
  SourcePos pos_;
};

class PitchOutOfRange : public DataError {
 public:
  PitchOutOfRange(SourcePos pos, int midi)
      : DataError("pitch out of piano range (A0..C8) at " + pos.str() +
                  ": MIDI " + std::to_string(midi)),
        pos_(pos),
        midi_(midi) {}
  SourcePos pos() const { return pos_; }
  int midi() const { return midi_; }

 private:
  SourcePos pos_;
  int midi_;
};

class MalformedHeader : public DataError {
 public:
  explicit MalformedHeader(const std::string& what)
      : DataError("malformed header: " + what) {}
};

// --- Piano roll ------------------------------------------------------------

class TooManyVoices : public DataError {
 public:
  TooManyVoices(int column, int found, int capacity)
      : DataError("column " + std::to_string(column) + " has " +
                  std::to_string(found) + " simultaneous pitches, capacity " +
                  std::to_string(capacity)),
        column_(column) {}
  int column() const { return column_; }

 private:
  int column_;
};

// --- Corpus ----------------------------------------------------------------

class EmptyCorpus : public DataError {
 public:
  explicit EmptyCorpus(const std::string& what) : DataError(what) {}
};

// --- Evolution -------------------------------------------------------------

class ShapeMismatch : public DataError {
 public:
  explicit ShapeMismatch(const std::string& what) : DataError(what) {}
};

class InvalidConfig : public ConfigError {
 public:
  explicit InvalidConfig(const std::string& what) : ConfigError(what) {}
};

// --- Listener model --------------------------------------------------------

class EmptySequence : public DataError {
 public:
  explicit EmptySequence(const std::string& what) : DataError(what) {}
};

/// Training loss became non-finite; the model is left at its last finite
/// state (maps to exit code 3 in the CLI).
class DivergenceDetected : public Error {
 public:
  explicit DivergenceDetected(const std::string& what) : Error(what) {}
};

class ChecksumMismatch : public DataError {
 public:
  explicit ChecksumMismatch(const std::string& what) : DataError(what) {}
};

class VersionMismatch : public DataError {
 public:
  explicit VersionMismatch(const std::string& what) : DataError(what) {}
};

// --- Ratings ingestion -----------------------------------------------------

class UnknownPieceId : public DataError {
 public:
  explicit UnknownPieceId(const std::string& what) : DataError(what) {}
};

class ScoreOutOfRange : public DataError {
 public:
  explicit ScoreOutOfRange(const std::string& what) : DataError(what) {}
};

class EmptyGroup : public DataError {
 public:
  explicit EmptyGroup(const std::string& what) : DataError(what) {}
};

}  // namespace harmonia
