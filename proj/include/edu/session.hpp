#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "edu/expected.hpp"
#include "edu/model.hpp"

namespace edu {

inline constexpr std::string_view kCorrectMessage = "Correct!";
inline constexpr std::string_view kWrongMessage = "I'm sorry, but it is wrong!";

enum class QuestionOrder { sequential, shuffled };
enum class WrongPolicy { advance, retry };

struct SessionConfig {
  QuestionOrder order = QuestionOrder::sequential;
  std::uint64_t shuffle_seed = 0;  // only read when order == shuffled
  WrongPolicy wrong_policy = WrongPolicy::advance;
  std::int64_t feedback_hold_ms = 2000;
  std::int64_t press_debounce_ms = 300;

  bool operator==(const SessionConfig&) const = default;
};

enum class Phase { Idle, Presenting, Feedback, Finished };

std::string_view to_string(Phase phase);
std::string_view to_string(QuestionOrder order);
std::string_view to_string(WrongPolicy policy);

struct AnswerLogEntry {
  std::string question_id;
  int segment = 0;
  bool was_correct = false;
  UtcMillis at = 0;
  int attempt = 1;  // 1-based, per question

  bool operator==(const AnswerLogEntry&) const = default;
};

struct AnswerOption {
  std::string label;
  SegmentColor color = SegmentColor::red;

  bool operator==(const AnswerOption&) const = default;
};

/// Carries display data only. Correctness never leaves the engine through this event.
struct QuestionPosted {
  int index = 0;  // 1-based position in the session order
  int total = 0;
  std::string text;
  std::vector<AnswerOption> answers;

  bool operator==(const QuestionPosted&) const = default;
};

struct FeedbackIssued {
  bool correct = false;
  int segment = 0;
  std::string message;

  bool operator==(const FeedbackIssued&) const = default;
};

struct SessionFinished {
  int correct_count = 0;
  int total = 0;

  bool operator==(const SessionFinished&) const = default;
};

using SessionEvent = std::variant<QuestionPosted, FeedbackIssued, SessionFinished>;
using SessionEvents = std::vector<SessionEvent>;

struct SessionState {
  Phase phase = Phase::Idle;
  SessionConfig config;
  /// Bank snapshot taken at start; later bank edits never reach a running session.
  std::shared_ptr<const std::vector<Question>> questions;
  std::vector<std::size_t> question_order;
  std::size_t cursor = 0;
  std::optional<bool> last_verdict;
  std::optional<UtcMillis> last_press_at;
  std::optional<UtcMillis> feedback_until;
  std::vector<AnswerLogEntry> log;
  int correct_count = 0;

  [[nodiscard]] const Question* current_question() const;
  [[nodiscard]] int total() const { return static_cast<int>(question_order.size()); }

  bool operator==(const SessionState& other) const;
};

struct SessionSummary {
  int total = 0;
  int correct_count = 0;
  std::vector<AnswerLogEntry> entries;

  bool operator==(const SessionSummary&) const = default;
};

struct Transition {
  SessionState state;
  SessionEvents events;
};

enum class SessionError { EmptyBank, InvalidConfig, SegmentOutOfRange };

std::string_view to_string(SessionError error);

/// xorshift64* (Vigna). State is seeded as `seed ^ 0x9E3779B97F4A7C15`, with a zero
/// state replaced by that constant. Each step: x ^= x >> 12; x ^= x << 25; x ^= x >> 27;
/// output x * 0x2545F4914F6CDD1D.
class Xorshift64Star {
 public:
  explicit Xorshift64Star(std::uint64_t seed);
  std::uint64_t next();

 private:
  std::uint64_t state_;
};

/// Fisher-Yates from the back: for i = n-1 .. 1, j = next() % (i + 1), swap(i, j).
std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed);

Expected<Transition, SessionError> start_session(const QuestionBank& bank, const SessionConfig& config,
                                                 UtcMillis now);

/// Presses outside Presenting, on unmapped segments, or inside the debounce window are
/// silently ignored. Only segment indices outside 0..3 are errors.
Expected<Transition, SessionError> handle_press(SessionState state, int segment, UtcMillis now);

Transition tick(SessionState state, UtcMillis now);

SessionSummary summarize(const SessionState& state);

/// Builds the display event for the question at `cursor`. Used for late-joining screens too.
QuestionPosted make_question_posted(const SessionState& state);

}  // namespace edu
