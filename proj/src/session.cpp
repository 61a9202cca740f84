#include "edu/session.hpp"

#include <algorithm>
#include <numeric>

namespace edu {

namespace {

constexpr std::uint64_t kSeedMix = 0x9E3779B97F4A7C15ULL;

int attempts_so_far(const SessionState& state, const std::string& question_id) {
  return static_cast<int>(std::count_if(state.log.begin(), state.log.end(), [&](const AnswerLogEntry& e) {
    return e.question_id == question_id;
  }));
}

}  // namespace

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::Idle: return "idle";
    case Phase::Presenting: return "presenting";
    case Phase::Feedback: return "feedback";
    case Phase::Finished: return "finished";
  }
  return "unknown";
}

std::string_view to_string(QuestionOrder order) {
  return order == QuestionOrder::shuffled ? "shuffled" : "sequential";
}

std::string_view to_string(WrongPolicy policy) {
  return policy == WrongPolicy::retry ? "retry" : "advance";
}

std::string_view to_string(SessionError error) {
  switch (error) {
    case SessionError::EmptyBank: return "EmptyBank";
    case SessionError::InvalidConfig: return "InvalidConfig";
    case SessionError::SegmentOutOfRange: return "SegmentOutOfRange";
  }
  return "Unknown";
}

Xorshift64Star::Xorshift64Star(std::uint64_t seed) : state_(seed ^ kSeedMix) {
  if (state_ == 0) state_ = kSeedMix;
}

std::uint64_t Xorshift64Star::next() {
  state_ ^= state_ >> 12;
  state_ ^= state_ << 25;
  state_ ^= state_ >> 27;
  return state_ * 0x2545F4914F6CDD1DULL;
}

std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Xorshift64Star rng(seed);
  for (std::size_t i = n; i-- > 1;) {
    const auto j = static_cast<std::size_t>(rng.next() % (i + 1));
    std::swap(order[i], order[j]);
  }
  return order;
}

const Question* SessionState::current_question() const {
  if (!questions || cursor >= question_order.size()) return nullptr;
  return &(*questions)[question_order[cursor]];
}

bool SessionState::operator==(const SessionState& other) const {
  const bool same_questions = (questions == other.questions) ||
                              (questions && other.questions && *questions == *other.questions);
  return same_questions && phase == other.phase && config == other.config &&
         question_order == other.question_order && cursor == other.cursor &&
         last_verdict == other.last_verdict && last_press_at == other.last_press_at &&
         feedback_until == other.feedback_until && log == other.log &&
         correct_count == other.correct_count;
}

QuestionPosted make_question_posted(const SessionState& state) {
  QuestionPosted ev;
  ev.index = static_cast<int>(state.cursor) + 1;
  ev.total = state.total();
  if (const auto* q = state.current_question()) {
    ev.text = q->text;
    for (const auto& a : assign_segment_colors(*q)) ev.answers.push_back({a.text, a.color});
  }
  return ev;
}

Expected<Transition, SessionError> start_session(const QuestionBank& bank, const SessionConfig& config,
                                                 UtcMillis now) {
  if (bank.questions.empty()) return unexpected(SessionError::EmptyBank);
  if (config.feedback_hold_ms <= 0 || config.press_debounce_ms < 0) {
    return unexpected(SessionError::InvalidConfig);
  }
  (void)now;

  SessionState s;
  s.config = config;
  s.questions = std::make_shared<const std::vector<Question>>(bank.questions);
  const auto n = bank.questions.size();
  if (config.order == QuestionOrder::shuffled) {
    s.question_order = shuffled_order(n, config.shuffle_seed);
  } else {
    s.question_order.resize(n);
    std::iota(s.question_order.begin(), s.question_order.end(), std::size_t{0});
  }
  s.phase = Phase::Presenting;
  s.cursor = 0;

  Transition t{std::move(s), {}};
  t.events.emplace_back(make_question_posted(t.state));
  return t;
}

Expected<Transition, SessionError> handle_press(SessionState state, int segment, UtcMillis now) {
  if (segment < 0 || segment >= kSegmentCount) return unexpected(SessionError::SegmentOutOfRange);

  Transition t{std::move(state), {}};
  auto& s = t.state;
  if (s.phase != Phase::Presenting) return t;
  const auto* q = s.current_question();
  if (q == nullptr || static_cast<std::size_t>(segment) >= q->answers.size()) return t;
  if (s.last_press_at && now - *s.last_press_at < s.config.press_debounce_ms) return t;

  const bool correct = q->answers[static_cast<std::size_t>(segment)].is_correct;
  s.log.push_back({q->id, segment, correct, now, attempts_so_far(s, q->id) + 1});
  if (correct) ++s.correct_count;
  s.last_press_at = now;
  s.last_verdict = correct;
  s.feedback_until = now + s.config.feedback_hold_ms;
  s.phase = Phase::Feedback;

  t.events.emplace_back(
      FeedbackIssued{correct, segment, std::string(correct ? kCorrectMessage : kWrongMessage)});
  return t;
}

Transition tick(SessionState state, UtcMillis now) {
  Transition t{std::move(state), {}};
  auto& s = t.state;
  if (s.phase != Phase::Feedback || !s.feedback_until || now < *s.feedback_until) return t;

  const bool repeat = s.config.wrong_policy == WrongPolicy::retry && s.last_verdict == false;
  s.feedback_until.reset();
  if (!repeat) ++s.cursor;

  if (s.cursor >= s.question_order.size()) {
    s.phase = Phase::Finished;
    t.events.emplace_back(SessionFinished{s.correct_count, s.total()});
  } else {
    s.phase = Phase::Presenting;
    t.events.emplace_back(make_question_posted(s));
  }
  return t;
}

SessionSummary summarize(const SessionState& state) {
  return {state.total(), state.correct_count, state.log};
}

}  // namespace edu
