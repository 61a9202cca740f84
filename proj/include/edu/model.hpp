#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "edu/expected.hpp"

namespace edu {

using Json = nlohmann::ordered_json;

/// Milliseconds since the Unix epoch (UTC). Always supplied by the caller.
using UtcMillis = std::int64_t;

/// Number of physical floor segments. Also the upper bound on answers per question.
inline constexpr int kSegmentCount = 4;
inline constexpr int kMinAnswers = 2;
inline constexpr int kMaxAnswers = kSegmentCount;

struct Answer {
  std::string id;
  std::string text;
  bool is_correct = false;

  bool operator==(const Answer&) const = default;
};

/// Answer order is significant: answers[k] is bound to floor segment k.
struct Question {
  std::string id;
  std::string text;
  std::vector<Answer> answers;

  bool operator==(const Question&) const = default;
};

struct QuestionBank {
  std::vector<Question> questions;
  std::int64_t revision = 0;

  bool operator==(const QuestionBank&) const = default;

  [[nodiscard]] const Question* find(std::string_view id) const;
};

enum class SegmentColor { red, blue, green, yellow };

/// Fixed segment→color table: 0 red, 1 blue, 2 green, 3 yellow.
inline constexpr std::array<SegmentColor, kSegmentCount> kSegmentColors = {
    SegmentColor::red, SegmentColor::blue, SegmentColor::green, SegmentColor::yellow};

std::string_view to_string(SegmentColor color);
std::optional<SegmentColor> segment_color_from_string(std::string_view name);

struct SegmentAssignment {
  int segment = 0;
  SegmentColor color = SegmentColor::red;
  std::string text;

  bool operator==(const SegmentAssignment&) const = default;
};

struct TeacherAccount {
  std::string username;
  std::string password_hash;
  UtcMillis created_at = 0;

  bool operator==(const TeacherAccount&) const = default;
};

enum class ValidationCode {
  EmptyText,
  TooFewAnswers,
  TooManyAnswers,
  NoCorrectAnswer,
  MultipleCorrectAnswers,
  DuplicateAnswerId,
  EmptyAnswerText,
  EmptyId,
  DuplicateQuestionId,
};

std::string_view to_string(ValidationCode code);

struct ValidationError {
  ValidationCode code;
  std::string question_id;
  std::string detail;

  bool operator==(const ValidationError&) const = default;
};

using ValidationErrors = std::vector<ValidationError>;

/// Structural problem in a JSON document; `path` is a JSON-pointer-like location.
struct ParseError {
  std::string path;
  std::string reason;

  bool operator==(const ParseError&) const = default;
  [[nodiscard]] std::string message() const;
};

/// A bank document either fails to parse or parses into something invalid.
using BankError = std::variant<ParseError, ValidationErrors>;

std::string describe(const BankError& error);
std::string describe(const ValidationErrors& errors);

/// Checks every rule and reports each violation separately. Never returns a partially fixed question.
Expected<Question, ValidationErrors> validate_question(const Question& candidate);

/// Entry k pairs answers[k] with the color of segment k.
std::vector<SegmentAssignment> assign_segment_colors(const Question& question);

/// Canonical compact JSON: fixed key order, no insignificant whitespace.
std::string serialize_bank(const QuestionBank& bank);
Expected<QuestionBank, BankError> parse_bank(std::string_view document);

Json bank_to_json(const QuestionBank& bank);
Expected<QuestionBank, BankError> bank_from_json(const Json& doc, const std::string& path = "");

Json question_to_json(const Question& question);
/// Structure only; call validate_question for the invariants.
Expected<Question, ParseError> question_from_json(const Json& doc, const std::string& path = "");

Json to_json(const ValidationError& error);
Json to_json(const ValidationErrors& errors);

/// Upsert `payload` by id (replacements keep their slot, new ids append in payload order),
/// then drop `deletions`. Revision bumps by one only when the question list changed.
/// Any invalid payload question rejects the whole merge.
Expected<QuestionBank, ValidationErrors> merge_sync_payload(const QuestionBank& bank,
                                                            const std::vector<Question>& payload,
                                                            const std::vector<std::string>& deletions);

/// 128-bit random identifier, lowercase hex.
std::string generate_id();

}  // namespace edu
