#include "edu/floor_sim.hpp"

#include <termios.h>
#include <unistd.h>

#include <charconv>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "edu/wire.hpp"
#include "edu/ws_client.hpp"

namespace edu::floor {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_words(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const auto start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

std::optional<long long> to_integer(std::string_view word) {
  long long v = 0;
  const auto* end = word.data() + word.size();
  auto [ptr, ec] = std::from_chars(word.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

// Restores the terminal on scope exit; a no-op when stdin is not a TTY.
class RawTerminal {
 public:
  RawTerminal() {
    if (::isatty(STDIN_FILENO) == 0 || ::tcgetattr(STDIN_FILENO, &saved_) != 0) return;
    termios raw = saved_;
    raw.c_lflag &= static_cast<tcflag_t>(~(ICANON | ECHO));
    raw.c_cc[VMIN] = 1;
    raw.c_cc[VTIME] = 0;
    active_ = ::tcsetattr(STDIN_FILENO, TCSANOW, &raw) == 0;
  }
  ~RawTerminal() {
    if (active_) ::tcsetattr(STDIN_FILENO, TCSANOW, &saved_);
  }
  RawTerminal(const RawTerminal&) = delete;
  RawTerminal& operator=(const RawTerminal&) = delete;

 private:
  termios saved_{};
  bool active_ = false;
};

class Session {
 public:
  explicit Session(const RunOptions& options) : options_(options) {
    client_.on_frame([this](const client::ReceivedFrame& f) {
      std::lock_guard lock(mu_);
      transcript_.push_back(f.text);
      if (options_.transcript_out != nullptr) *options_.transcript_out << f.text << std::endl;
    });
  }

  // Connects and completes the hello/welcome exchange.
  bool open(RunResult& result) {
    try {
      client_.connect(options_.hub_url, options_.connect_timeout);
    } catch (const std::exception& e) {
      return fail(result, exit_code::connectivity, std::string("ConnectionRefused: ") + e.what());
    }
    client_.send(wire::encode(wire::Hello{wire::ClientRole::floor}));
    auto first = client_.next_frame(options_.connect_timeout);
    if (!first) return fail(result, exit_code::connectivity, "HandshakeRejected: no welcome from hub");
    auto msg = wire::decode(first->text);
    if (!msg || !std::holds_alternative<wire::Welcome>(*msg)) {
      return fail(result, exit_code::connectivity, "HandshakeRejected: " + first->text);
    }
    return true;
  }

  bool press(int segment, RunResult& result) {
    if (!client_.is_open()) return fail(result, exit_code::connectivity, "connection lost");
    client_.send(press_frame(segment));
    return true;
  }

  bool expect(bool correct, std::size_t index, RunResult& result) {
    const auto deadline = std::chrono::steady_clock::now() + options_.expect_timeout;
    for (;;) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      auto frame = left.count() > 0 ? client_.next_frame(left) : std::nullopt;
      if (!frame) {
        if (!client_.is_open()) return fail(result, exit_code::connectivity, "connection lost while waiting for feedback");
        result.failed_command = index;
        return fail(result, exit_code::assertion,
                    "AssertionFailed at command " + std::to_string(index) + ": no feedback within " +
                        std::to_string(options_.expect_timeout.count()) + " ms");
      }
      auto msg = wire::decode(frame->text);
      if (!msg) continue;
      const auto* fb = std::get_if<wire::Feedback>(&*msg);
      if (fb == nullptr) continue;
      if (fb->correct == correct) return true;
      result.failed_command = index;
      return fail(result, exit_code::assertion,
                  "AssertionFailed at command " + std::to_string(index) + ": expected " +
                      (correct ? "correct" : "wrong") + " feedback, got " + (fb->correct ? "correct" : "wrong"));
    }
  }

  bool is_open() const { return client_.is_open(); }

  void finish(RunResult& result) {
    client_.close();
    std::lock_guard lock(mu_);
    result.transcript = transcript_;
  }

 private:
  bool fail(RunResult& result, int code, std::string message) {
    result.exit_code = code;
    result.message = std::move(message);
    if (options_.err != nullptr) *options_.err << result.message << std::endl;
    return false;
  }

  const RunOptions& options_;
  client::WsClient client_;
  std::mutex mu_;
  std::vector<std::string> transcript_;
};

}  // namespace

Expected<PressScript, ScriptParseError> parse_script(std::string_view text) {
  PressScript script;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto words = split_words(line);
    auto error = [&](std::string reason) { return unexpected(ScriptParseError{line_no, std::move(reason)}); };

    if (words[0] == "wait") {
      if (words.size() != 2) return error("expected 'wait <ms>'");
      auto ms = to_integer(words[1]);
      if (!ms) return error("wait duration must be an integer");
      if (*ms <= 0 || *ms > 24LL * 60 * 60 * 1000) return error("wait duration must be positive");
      script.emplace_back(Wait{static_cast<int>(*ms)});
    } else if (words[0] == "press") {
      if (words.size() != 2) return error("expected 'press <0-3>'");
      auto seg = to_integer(words[1]);
      if (!seg) return error("segment must be an integer");
      if (*seg < 0 || *seg > 3) return error("segment must be in 0..3");
      script.emplace_back(PressSegment{static_cast<int>(*seg)});
    } else if (words[0] == "expect") {
      if (words.size() != 3 || words[1] != "feedback") return error("expected 'expect feedback <correct|wrong>'");
      if (words[2] == "correct") {
        script.emplace_back(ExpectFeedback{true});
      } else if (words[2] == "wrong") {
        script.emplace_back(ExpectFeedback{false});
      } else {
        return error("feedback verdict must be 'correct' or 'wrong'");
      }
    } else {
      return error("unknown command '" + std::string(words[0]) + "'");
    }
  }
  return script;
}

std::string press_frame(int segment) { return wire::encode(wire::Press{segment}); }

std::optional<int> segment_for_key(char key) {
  if (key >= '1' && key <= '4') return key - '1';
  return std::nullopt;
}

RunResult run_script(const PressScript& script, const RunOptions& options) {
  RunResult result;
  Session session(options);
  if (!session.open(result)) {
    session.finish(result);
    return result;
  }
  for (std::size_t i = 0; i < script.size(); ++i) {
    bool ok = std::visit(
        [&](const auto& cmd) {
          using T = std::decay_t<decltype(cmd)>;
          if constexpr (std::is_same_v<T, Wait>) {
            std::this_thread::sleep_for(std::chrono::milliseconds(cmd.ms));
            return true;
          } else if constexpr (std::is_same_v<T, PressSegment>) {
            return session.press(cmd.segment, result);
          } else {
            return session.expect(cmd.correct, i, result);
          }
        },
        script[i]);
    if (!ok) break;
  }
  session.finish(result);
  return result;
}

RunResult run_interactive(std::istream& in, const RunOptions& options) {
  RunResult result;
  Session session(options);
  if (!session.open(result)) {
    session.finish(result);
    return result;
  }
  if (options.err != nullptr) *options.err << "keys 1-4 press segments 0-3, q quits" << std::endl;

  RawTerminal raw;
  char key = 0;
  while (in.get(key)) {
    if (key == 'q') break;
    if (key == '\n' || key == '\r' || key == ' ') continue;
    auto segment = segment_for_key(key);
    if (!segment) {
      if (options.err != nullptr) *options.err << "ignored key '" << key << "'" << std::endl;
      continue;
    }
    if (!session.press(*segment, result)) break;
  }
  session.finish(result);
  return result;
}

}  // namespace edu::floor
