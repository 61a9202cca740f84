#include "edu/model.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <sodium.h>

namespace edu {

namespace {

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

std::string join_path(const std::string& base, std::string_view leaf) {
  return base + "/" + std::string(leaf);
}

std::string join_path(const std::string& base, std::size_t index) {
  return base + "/" + std::to_string(index);
}

Expected<std::string, ParseError> require_string(const Json& obj, std::string_view key,
                                                 const std::string& path) {
  auto it = obj.find(std::string(key));
  if (it == obj.end()) return unexpected(ParseError{join_path(path, key), "missing field"});
  if (!it->is_string()) return unexpected(ParseError{join_path(path, key), "expected string"});
  return it->get<std::string>();
}

}  // namespace

const Question* QuestionBank::find(std::string_view id) const {
  auto it = std::find_if(questions.begin(), questions.end(),
                         [&](const Question& q) { return q.id == id; });
  return it == questions.end() ? nullptr : &*it;
}

std::string_view to_string(SegmentColor color) {
  switch (color) {
    case SegmentColor::red: return "red";
    case SegmentColor::blue: return "blue";
    case SegmentColor::green: return "green";
    case SegmentColor::yellow: return "yellow";
  }
  return "unknown";
}

std::optional<SegmentColor> segment_color_from_string(std::string_view name) {
  for (auto c : kSegmentColors) {
    if (to_string(c) == name) return c;
  }
  return std::nullopt;
}

std::string_view to_string(ValidationCode code) {
  switch (code) {
    case ValidationCode::EmptyText: return "EmptyText";
    case ValidationCode::TooFewAnswers: return "TooFewAnswers";
    case ValidationCode::TooManyAnswers: return "TooManyAnswers";
    case ValidationCode::NoCorrectAnswer: return "NoCorrectAnswer";
    case ValidationCode::MultipleCorrectAnswers: return "MultipleCorrectAnswers";
    case ValidationCode::DuplicateAnswerId: return "DuplicateAnswerId";
    case ValidationCode::EmptyAnswerText: return "EmptyAnswerText";
    case ValidationCode::EmptyId: return "EmptyId";
    case ValidationCode::DuplicateQuestionId: return "DuplicateQuestionId";
  }
  return "Unknown";
}

std::string ParseError::message() const {
  return (path.empty() ? std::string("/") : path) + ": " + reason;
}

std::string describe(const ValidationErrors& errors) {
  std::string out;
  for (const auto& e : errors) {
    if (!out.empty()) out += "; ";
    out += std::string(to_string(e.code));
    if (!e.question_id.empty()) out += " (question " + e.question_id + ")";
    if (!e.detail.empty()) out += ": " + e.detail;
  }
  return out;
}

std::string describe(const BankError& error) {
  if (const auto* p = std::get_if<ParseError>(&error)) return "parse error at " + p->message();
  return "invalid bank: " + describe(std::get<ValidationErrors>(error));
}

Expected<Question, ValidationErrors> validate_question(const Question& candidate) {
  ValidationErrors errors;
  auto add = [&](ValidationCode code, std::string detail = {}) {
    errors.push_back({code, candidate.id, std::move(detail)});
  };

  if (candidate.id.empty()) add(ValidationCode::EmptyId, "question id is empty");
  if (is_blank(candidate.text)) add(ValidationCode::EmptyText);

  const auto n = candidate.answers.size();
  if (n < static_cast<std::size_t>(kMinAnswers)) {
    add(ValidationCode::TooFewAnswers, std::to_string(n) + " answer(s), need at least " +
                                           std::to_string(kMinAnswers));
  }
  if (n > static_cast<std::size_t>(kMaxAnswers)) {
    add(ValidationCode::TooManyAnswers, std::to_string(n) + " answers, at most " +
                                            std::to_string(kMaxAnswers) + " allowed");
  }

  const auto correct = std::count_if(candidate.answers.begin(), candidate.answers.end(),
                                     [](const Answer& a) { return a.is_correct; });
  // An empty answer list is already TooFewAnswers; don't pile on.
  if (n > 0 && correct == 0) add(ValidationCode::NoCorrectAnswer);
  if (correct > 1) {
    add(ValidationCode::MultipleCorrectAnswers, std::to_string(correct) + " answers marked correct");
  }

  std::set<std::string> seen;
  bool empty_answer_id = false;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = candidate.answers[i];
    if (a.id.empty()) {
      empty_answer_id = true;
    } else if (!seen.insert(a.id).second) {
      add(ValidationCode::DuplicateAnswerId, a.id);
    }
    if (is_blank(a.text)) add(ValidationCode::EmptyAnswerText, "answer " + std::to_string(i));
  }
  if (empty_answer_id) add(ValidationCode::EmptyId, "answer id is empty");

  if (!errors.empty()) return unexpected(std::move(errors));
  return candidate;
}

std::vector<SegmentAssignment> assign_segment_colors(const Question& question) {
  std::vector<SegmentAssignment> out;
  const auto n = std::min<std::size_t>(question.answers.size(), kSegmentColors.size());
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.push_back({static_cast<int>(k), kSegmentColors[k], question.answers[k].text});
  }
  return out;
}

Json question_to_json(const Question& question) {
  Json answers = Json::array();
  for (const auto& a : question.answers) {
    Json aj;
    aj["id"] = a.id;
    aj["text"] = a.text;
    aj["is_correct"] = a.is_correct;
    answers.push_back(std::move(aj));
  }
  Json qj;
  qj["id"] = question.id;
  qj["text"] = question.text;
  qj["answers"] = std::move(answers);
  return qj;
}

Expected<Question, ParseError> question_from_json(const Json& doc, const std::string& path) {
  if (!doc.is_object()) return unexpected(ParseError{path, "expected object"});
  Question q;
  auto id = require_string(doc, "id", path);
  if (!id) return unexpected(id.error());
  auto text = require_string(doc, "text", path);
  if (!text) return unexpected(text.error());
  q.id = std::move(*id);
  q.text = std::move(*text);

  auto it = doc.find("answers");
  const auto answers_path = join_path(path, "answers");
  if (it == doc.end()) return unexpected(ParseError{answers_path, "missing field"});
  if (!it->is_array()) return unexpected(ParseError{answers_path, "expected array"});
  for (std::size_t i = 0; i < it->size(); ++i) {
    const auto& aj = (*it)[i];
    const auto apath = join_path(answers_path, i);
    if (!aj.is_object()) return unexpected(ParseError{apath, "expected object"});
    Answer a;
    auto aid = require_string(aj, "id", apath);
    if (!aid) return unexpected(aid.error());
    auto atext = require_string(aj, "text", apath);
    if (!atext) return unexpected(atext.error());
    auto flag = aj.find("is_correct");
    if (flag == aj.end()) return unexpected(ParseError{join_path(apath, "is_correct"), "missing field"});
    if (!flag->is_boolean()) {
      return unexpected(ParseError{join_path(apath, "is_correct"), "expected boolean"});
    }
    a.id = std::move(*aid);
    a.text = std::move(*atext);
    a.is_correct = flag->get<bool>();
    q.answers.push_back(std::move(a));
  }
  return q;
}

Json bank_to_json(const QuestionBank& bank) {
  Json doc;
  doc["revision"] = bank.revision;
  doc["questions"] = Json::array();
  for (const auto& q : bank.questions) doc["questions"].push_back(question_to_json(q));
  return doc;
}

std::string serialize_bank(const QuestionBank& bank) { return bank_to_json(bank).dump(); }

Expected<QuestionBank, BankError> bank_from_json(const Json& doc, const std::string& path) {
  if (!doc.is_object()) return unexpected(BankError{ParseError{path, "expected object"}});
  auto rev = doc.find("revision");
  if (rev == doc.end()) return unexpected(BankError{ParseError{join_path(path, "revision"), "missing field"}});
  if (!rev->is_number_integer() || rev->get<std::int64_t>() < 0) {
    return unexpected(BankError{ParseError{join_path(path, "revision"), "expected non-negative integer"}});
  }
  auto qs = doc.find("questions");
  const auto qpath = join_path(path, "questions");
  if (qs == doc.end()) return unexpected(BankError{ParseError{qpath, "missing field"}});
  if (!qs->is_array()) return unexpected(BankError{ParseError{qpath, "expected array"}});

  QuestionBank bank;
  bank.revision = rev->get<std::int64_t>();
  ValidationErrors errors;
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < qs->size(); ++i) {
    auto q = question_from_json((*qs)[i], join_path(qpath, i));
    if (!q) return unexpected(BankError{q.error()});
    auto valid = validate_question(*q);
    if (!valid) {
      errors.insert(errors.end(), valid.error().begin(), valid.error().end());
    }
    if (!ids.insert(q->id).second) {
      errors.push_back({ValidationCode::DuplicateQuestionId, q->id, {}});
    }
    bank.questions.push_back(std::move(*q));
  }
  if (!errors.empty()) return unexpected(BankError{std::move(errors)});
  return bank;
}

Expected<QuestionBank, BankError> parse_bank(std::string_view document) {
  Json doc;
  try {
    doc = Json::parse(document);
  } catch (const Json::parse_error& e) {
    return unexpected(BankError{ParseError{"byte " + std::to_string(e.byte), e.what()}});
  }
  return bank_from_json(doc);
}

Json to_json(const ValidationError& error) {
  Json j;
  j["code"] = std::string(to_string(error.code));
  j["question_id"] = error.question_id;
  if (!error.detail.empty()) j["detail"] = error.detail;
  return j;
}

Json to_json(const ValidationErrors& errors) {
  Json arr = Json::array();
  for (const auto& e : errors) arr.push_back(to_json(e));
  return arr;
}

Expected<QuestionBank, ValidationErrors> merge_sync_payload(const QuestionBank& bank,
                                                            const std::vector<Question>& payload,
                                                            const std::vector<std::string>& deletions) {
  ValidationErrors errors;
  std::unordered_set<std::string> payload_ids;
  for (const auto& q : payload) {
    auto valid = validate_question(q);
    if (!valid) errors.insert(errors.end(), valid.error().begin(), valid.error().end());
    if (!q.id.empty() && !payload_ids.insert(q.id).second) {
      errors.push_back({ValidationCode::DuplicateQuestionId, q.id, "repeated in payload"});
    }
  }
  if (!errors.empty()) return unexpected(std::move(errors));

  std::vector<Question> merged = bank.questions;
  std::unordered_map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < merged.size(); ++i) slot.emplace(merged[i].id, i);
  for (const auto& q : payload) {
    if (auto it = slot.find(q.id); it != slot.end()) {
      merged[it->second] = q;
    } else {
      slot.emplace(q.id, merged.size());
      merged.push_back(q);
    }
  }

  const std::unordered_set<std::string> doomed(deletions.begin(), deletions.end());
  std::erase_if(merged, [&](const Question& q) { return doomed.contains(q.id); });

  QuestionBank out;
  out.revision = bank.revision;
  if (merged != bank.questions) ++out.revision;
  out.questions = std::move(merged);
  return out;
}

std::string generate_id() {
  static const bool ready = sodium_init() >= 0;
  if (!ready) throw std::runtime_error("libsodium initialisation failed");
  std::array<unsigned char, 16> raw{};
  randombytes_buf(raw.data(), raw.size());
  std::array<char, 33> hex{};
  sodium_bin2hex(hex.data(), hex.size(), raw.data(), raw.size());
  return std::string(hex.data(), 32);
}

}  // namespace edu
