#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace offcpu {

enum class Errc {
  // trace_model
  MalformedRecord,
  NonMonotonicTimestamp,
  UnknownEventKind,
  NestingViolation,
  UnmatchedEnd,
  OverlappingSpan,
  // state_engine
  SwitchConflict,
  InconsistentState,
  SnapshotFormat,
  // depgraph
  RootConflict,
  // analysis
  TooFewSpans,
  EmptyCluster,
  // shared
  InvalidParameter,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::MalformedRecord: return "MalformedRecord";
    case Errc::NonMonotonicTimestamp: return "NonMonotonicTimestamp";
    case Errc::UnknownEventKind: return "UnknownEventKind";
    case Errc::NestingViolation: return "NestingViolation";
    case Errc::UnmatchedEnd: return "UnmatchedEnd";
    case Errc::OverlappingSpan: return "OverlappingSpan";
    case Errc::SwitchConflict: return "SwitchConflict";
    case Errc::InconsistentState: return "InconsistentState";
    case Errc::SnapshotFormat: return "SnapshotFormat";
    case Errc::RootConflict: return "RootConflict";
    case Errc::TooFewSpans: return "TooFewSpans";
    case Errc::EmptyCluster: return "EmptyCluster";
    case Errc::InvalidParameter: return "InvalidParameter";
  }
  return "Unknown";
}

// Every failure in the library is reported through this type. `line` is the
// 1-based input line for reader errors and 0 when not applicable.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what, std::size_t line = 0)
      : std::runtime_error(format(code, what, line)), code_(code), line_(line) {}

  Errc code() const noexcept { return code_; }
  std::size_t line() const noexcept { return line_; }

 private:
  static std::string format(Errc code, const std::string& what, std::size_t line) {
    std::string out(to_string(code));
    if (line != 0) out += " at line " + std::to_string(line);
    out += ": ";
    out += what;
    return out;
  }

  Errc code_;
  std::size_t line_;
};

}  // namespace offcpu
