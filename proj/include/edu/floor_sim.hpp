#pragma once

#include <chrono>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "edu/expected.hpp"

namespace edu::floor {

struct Wait {
  int ms = 0;
  bool operator==(const Wait&) const = default;
};

struct PressSegment {
  int segment = 0;
  bool operator==(const PressSegment&) const = default;
};

struct ExpectFeedback {
  bool correct = false;
  bool operator==(const ExpectFeedback&) const = default;
};

using Command = std::variant<Wait, PressSegment, ExpectFeedback>;
using PressScript = std::vector<Command>;

struct ScriptParseError {
  int line = 0;  // 1-based
  std::string reason;
  bool operator==(const ScriptParseError&) const = default;
};

/// Line-oriented: `wait <ms>`, `press <0-3>`, `expect feedback <correct|wrong>`.
/// Blank lines and `#` comments (whole-line or trailing) are skipped.
Expected<PressScript, ScriptParseError> parse_script(std::string_view text);

/// The exact frame the physical floor sends for a segment.
std::string press_frame(int segment);

/// Interactive key binding: '1'..'4' -> segments 0..3.
std::optional<int> segment_for_key(char key);

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int assertion = 1;
inline constexpr int connectivity = 2;
inline constexpr int parse = 3;
}  // namespace exit_code

struct RunOptions {
  std::string hub_url;
  /// How long `expect feedback` waits for the next unconsumed Feedback frame.
  std::chrono::milliseconds expect_timeout{5000};
  std::chrono::milliseconds connect_timeout{5000};
  /// Every received frame is written here, one per line, as it arrives.
  std::ostream* transcript_out = nullptr;
  /// Diagnostics.
  std::ostream* err = nullptr;
};

struct RunResult {
  int exit_code = exit_code::ok;
  std::vector<std::string> transcript;
  std::string message;
  /// Index of the failing command when exit_code == assertion.
  std::optional<std::size_t> failed_command;
};

RunResult run_script(const PressScript& script, const RunOptions& options);

/// Reads keys from `in` until EOF or 'q'.
RunResult run_interactive(std::istream& in, const RunOptions& options);

}  // namespace edu::floor
