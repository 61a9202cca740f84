#include "edu/teacher.hpp"

#include <termios.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <httplib.h>

#include "edu/store.hpp"
#include "edu/wire.hpp"
#include "edu/ws_client.hpp"

namespace edu::teacher {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kCorrectSuffix = ":correct";

class CliFailure : public std::runtime_error {
 public:
  CliFailure(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
  [[nodiscard]] int code() const noexcept { return code_; }

 private:
  int code_;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliFailure(exit_code::usage, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct Context {
  std::string hub;
  fs::path bank;
  fs::path credentials;
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
};

Credentials load_credentials(const Context& ctx) {
  std::error_code ec;
  if (!fs::exists(ctx.credentials, ec)) {
    throw CliFailure(exit_code::auth, "not logged in; run `edu-teacher login` first");
  }
  try {
    auto j = Json::parse(read_file(ctx.credentials));
    return {j.at("hub").get<std::string>(), j.at("username").get<std::string>(), j.at("token").get<std::string>(),
            j.at("expires_at").get<UtcMillis>()};
  } catch (const Json::exception&) {
    throw CliFailure(exit_code::auth, "credentials file " + ctx.credentials.string() + " is corrupt; log in again");
  }
}

void save_credentials(const Context& ctx, const Credentials& creds) {
  Json j;
  j["hub"] = creds.hub;
  j["username"] = creds.username;
  j["token"] = creds.token;
  j["expires_at"] = creds.expires_at;
  if (ctx.credentials.has_parent_path()) fs::create_directories(ctx.credentials.parent_path());
  atomic_write_file(ctx.credentials, j.dump());
}

std::string read_password(Context& ctx, const std::string& given) {
  if (!given.empty()) return given;
  ctx.err << "password: " << std::flush;
  termios saved{};
  const bool tty = &ctx.in == &std::cin && ::isatty(STDIN_FILENO) != 0 && ::tcgetattr(STDIN_FILENO, &saved) == 0;
  if (tty) {
    termios quiet = saved;
    quiet.c_lflag &= static_cast<tcflag_t>(~ECHO);
    ::tcsetattr(STDIN_FILENO, TCSANOW, &quiet);
  }
  std::string line;
  std::getline(ctx.in, line);
  if (tty) {
    ::tcsetattr(STDIN_FILENO, TCSANOW, &saved);
    ctx.err << "\n";
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.empty()) throw CliFailure(exit_code::usage, "empty password");
  return line;
}

struct Reply {
  int status = 0;
  Json body;
};

Reply call(const Context& ctx, const std::string& method, const std::string& path, const Json* body,
           const std::string& token = {}) {
  httplib::Client client(ctx.hub);
  client.set_connection_timeout(5, 0);
  client.set_read_timeout(30, 0);
  httplib::Headers headers;
  if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);
  const std::string payload = body ? body->dump() : std::string();

  httplib::Result res;
  if (method == "GET") {
    res = client.Get(path, headers);
  } else if (method == "DELETE") {
    res = client.Delete(path, headers);
  } else {
    res = client.Post(path, headers, payload, "application/json");
  }
  if (!res) {
    throw CliFailure(exit_code::connectivity, "cannot reach hub at " + ctx.hub + ": " + httplib::to_string(res.error()));
  }
  Reply reply{res->status, Json::object()};
  if (!res->body.empty()) {
    try {
      reply.body = Json::parse(res->body);
    } catch (const Json::parse_error&) {
      reply.body = Json{{"raw", res->body}};
    }
  }
  return reply;
}

std::string error_text(const Reply& r) {
  std::string s = r.body.value("error", std::string("http ") + std::to_string(r.status));
  if (r.body.contains("detail") && r.body["detail"].is_string()) s += ": " + r.body["detail"].get<std::string>();
  return s;
}

// Maps the shared non-2xx cases onto exit codes.
[[noreturn]] void fail_reply(const Reply& r, const std::string& what) {
  switch (r.status) {
    case 401: throw CliFailure(exit_code::auth, what + ": unauthorized; run `edu-teacher login` again");
    case 404: throw CliFailure(exit_code::not_found, what + ": " + error_text(r));
    case 409: throw CliFailure(exit_code::conflict, what + ": " + error_text(r));
    case 400: throw CliFailure(exit_code::validation, what + ": " + error_text(r));
    default: throw CliFailure(exit_code::usage, what + ": " + error_text(r));
  }
}

std::string authed_token(const Context& ctx) { return load_credentials(ctx).token; }

void cmd_register(Context& ctx, const std::string& username, const std::string& password) {
  Json body{{"username", username}, {"password", read_password(ctx, password)}};
  auto r = call(ctx, "POST", "/api/teachers/register", &body);
  if (r.status != 201) fail_reply(r, "register");
  ctx.out << "registered " << username << "\n";
}

void cmd_login(Context& ctx, const std::string& username, const std::string& password) {
  Json body{{"username", username}, {"password", read_password(ctx, password)}};
  auto r = call(ctx, "POST", "/api/teachers/login", &body);
  if (r.status == 401) throw CliFailure(exit_code::auth, "login failed: invalid credentials");
  if (r.status != 200) fail_reply(r, "login");
  save_credentials(ctx, {ctx.hub, username, r.body.at("token").get<std::string>(), r.body.at("expires_at").get<UtcMillis>()});
  ctx.out << "logged in as " << username << "\n";
}

void cmd_add(Context& ctx, const std::string& text, const std::vector<std::string>& answer_specs) {
  Question q;
  q.id = generate_id();
  q.text = text;
  for (const auto& spec : answer_specs) q.answers.push_back(parse_answer_spec(spec));
  auto valid = validate_question(q);
  if (!valid) throw CliFailure(exit_code::validation, "invalid question: " + describe(valid.error()));

  auto bank = load_local_bank(ctx.bank);
  auto merged = merge_sync_payload(bank, {*valid}, {});
  if (!merged) throw CliFailure(exit_code::validation, "invalid question: " + describe(merged.error()));
  save_local_bank(*merged, ctx.bank);
  ctx.out << "added " << q.id << "\n";
}

void cmd_remove(Context& ctx, const std::string& id) {
  auto bank = load_local_bank(ctx.bank);
  if (bank.find(id) == nullptr) throw CliFailure(exit_code::not_found, "no local question with id " + id);
  auto merged = merge_sync_payload(bank, {}, {id});
  auto state = load_sync_state(ctx.bank);
  if (std::find(state.pending_deletions.begin(), state.pending_deletions.end(), id) == state.pending_deletions.end()) {
    state.pending_deletions.push_back(id);
  }
  save_local_bank(*merged, ctx.bank);
  save_sync_state(state, ctx.bank);
  ctx.out << "removed " << id << " (deletion queued for next sync)\n";
}

void cmd_sync(Context& ctx) {
  const auto token = authed_token(ctx);
  auto bank = load_local_bank(ctx.bank);
  auto state = load_sync_state(ctx.bank);

  Json body;
  body["questions"] = Json::array();
  for (const auto& q : bank.questions) body["questions"].push_back(question_to_json(q));
  body["deletions"] = state.pending_deletions;

  auto r = call(ctx, "POST", "/api/sync", &body, token);
  if (r.status == 400 && r.body.contains("errors")) {
    ctx.err << "sync rejected, nothing was applied:\n";
    for (const auto& e : r.body["errors"]) {
      ctx.err << "  question " << e.value("question_id", std::string("?")) << ": " << e.value("code", std::string("?"));
      if (e.contains("detail")) ctx.err << " (" << e["detail"].get<std::string>() << ")";
      ctx.err << "\n";
    }
    throw CliFailure(exit_code::validation, "sync failed validation");
  }
  if (r.status != 200) fail_reply(r, "sync");

  const auto revision = r.body.at("revision").get<std::int64_t>();
  const bool unchanged = state.server_revision == revision;
  state.server_revision = revision;
  state.pending_deletions.clear();
  save_sync_state(state, ctx.bank);
  ctx.out << "synced " << bank.questions.size() << " question(s); server revision " << revision
          << (unchanged ? " (unchanged)" : "") << "\n";
}

void cmd_start(Context& ctx, bool shuffle, std::optional<std::uint64_t> seed, bool retry,
               std::optional<std::int64_t> hold, std::optional<std::int64_t> debounce) {
  Json body;
  body["order"] = shuffle ? "shuffled" : "sequential";
  if (seed) body["shuffle_seed"] = *seed;
  body["wrong_policy"] = retry ? "retry" : "advance";
  if (hold) body["feedback_hold_ms"] = *hold;
  if (debounce) body["press_debounce_ms"] = *debounce;
  auto r = call(ctx, "POST", "/api/session/start", &body, authed_token(ctx));
  if (r.status != 200) fail_reply(r, "start");
  ctx.out << "session started: " << r.body.value("total", 0) << " question(s), " << r.body.value("order", std::string())
          << " order";
  if (shuffle) ctx.out << " (seed " << r.body.value("shuffle_seed", std::uint64_t{0}) << ")";
  ctx.out << ", " << r.body.value("wrong_policy", std::string()) << " on wrong answers\n";
}

void cmd_stop(Context& ctx) {
  auto r = call(ctx, "POST", "/api/session/stop", nullptr, authed_token(ctx));
  if (r.status != 200) fail_reply(r, "stop");
  ctx.out << "session stopped: " << r.body.value("correct_count", 0) << "/" << r.body.value("total", 0)
          << " correct\n";
  for (const auto& e : r.body.value("entries", Json::array())) {
    ctx.out << "  " << e.value("question_id", std::string()) << " segment " << e.value("segment", 0) << " attempt "
            << e.value("attempt", 0) << ": " << (e.value("was_correct", false) ? "correct" : "wrong") << "\n";
  }
}

void cmd_status(Context& ctx) {
  auto r = call(ctx, "GET", "/api/session", nullptr);
  if (r.status != 200) fail_reply(r, "status");
  ctx.out << r.body.value("phase", std::string("?")) << " " << r.body.value("index", 0) << "/"
          << r.body.value("total", 0) << ", " << r.body.value("correct_count", 0) << " correct\n";
}

std::string ws_url_for(const std::string& hub) {
  auto ep = client::parse_url(hub);
  return "ws://" + ep.host + ":" + ep.port + "/ws";
}

void cmd_watch(Context& ctx, bool follow) {
  client::WsClient ws;
  try {
    ws.connect(ws_url_for(ctx.hub));
  } catch (const std::exception& e) {
    throw CliFailure(exit_code::connectivity, std::string("cannot connect to hub: ") + e.what());
  }
  ws.send(wire::encode(wire::Hello{wire::ClientRole::observer}));
  for (;;) {
    auto frame = ws.next_frame(std::chrono::hours(24));
    if (!frame) {
      if (!ws.is_open()) throw CliFailure(exit_code::connectivity, "hub closed the connection");
      continue;
    }
    auto msg = wire::decode(frame->text);
    if (!msg) continue;
    bool done = false;
    std::visit(
        [&](const auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, wire::Welcome>) {
            ctx.out << "watching (protocol " << m.protocol_version << ")\n";
          } else if constexpr (std::is_same_v<T, wire::Question>) {
            ctx.out << "Question " << m.index << "/" << m.total << ": " << m.text << "\n";
            for (std::size_t k = 0; k < m.answers.size(); ++k) {
              ctx.out << "  [" << k << " " << to_string(m.answers[k].color) << "] " << m.answers[k].label << "\n";
            }
          } else if constexpr (std::is_same_v<T, wire::Feedback>) {
            ctx.out << "Feedback (segment " << m.segment << "): " << m.message << "\n";
          } else if constexpr (std::is_same_v<T, wire::Finished>) {
            ctx.out << "Finished: " << m.correct_count << "/" << m.total << " correct\n";
            done = !follow;
          } else if constexpr (std::is_same_v<T, wire::Error>) {
            ctx.err << "hub error " << m.code << ": " << m.detail << "\n";
          }
        },
        *msg);
    ctx.out << std::flush;
    if (done) break;
  }
  ws.close();
}

}  // namespace

fs::path sync_state_path(const fs::path& bank_file) {
  auto p = bank_file;
  p += ".sync.json";
  return p;
}

fs::path default_credentials_path() {
  if (const char* env = std::getenv("INTERACTIVE_EDU_CREDENTIALS"); env != nullptr && *env != '\0') return env;
  const char* home = std::getenv("HOME");
  return fs::path(home != nullptr ? home : ".") / ".config" / "interactive-edu" / "credentials.json";
}

QuestionBank load_local_bank(const fs::path& path) {
  std::error_code ec;
  if (!fs::exists(path, ec)) return {};
  auto parsed = parse_bank(read_file(path));
  if (!parsed) throw CliFailure(exit_code::validation, "local bank " + path.string() + ": " + describe(parsed.error()));
  return std::move(*parsed);
}

void save_local_bank(const QuestionBank& bank, const fs::path& path) {
  atomic_write_file(path, serialize_bank(bank),
                    fs::perms::owner_read | fs::perms::owner_write | fs::perms::group_read | fs::perms::others_read);
}

SyncState load_sync_state(const fs::path& bank_file) {
  const auto path = sync_state_path(bank_file);
  std::error_code ec;
  if (!fs::exists(path, ec)) return {};
  try {
    auto j = Json::parse(read_file(path));
    SyncState s;
    s.pending_deletions = j.at("pending_deletions").get<std::vector<std::string>>();
    if (j.contains("server_revision") && !j["server_revision"].is_null()) {
      s.server_revision = j["server_revision"].get<std::int64_t>();
    }
    return s;
  } catch (const Json::exception& e) {
    throw CliFailure(exit_code::usage, "sync state " + path.string() + " is corrupt: " + e.what());
  }
}

void save_sync_state(const SyncState& state, const fs::path& bank_file) {
  Json j;
  j["pending_deletions"] = state.pending_deletions;
  j["server_revision"] = state.server_revision ? Json(*state.server_revision) : Json(nullptr);
  atomic_write_file(sync_state_path(bank_file), j.dump());
}

Answer parse_answer_spec(const std::string& spec) {
  Answer a;
  a.id = generate_id();
  if (spec.size() >= kCorrectSuffix.size() && spec.ends_with(kCorrectSuffix)) {
    a.text = spec.substr(0, spec.size() - kCorrectSuffix.size());
    a.is_correct = true;
  } else {
    a.text = spec;
  }
  return a;
}

std::string format_bank(const QuestionBank& bank) {
  std::ostringstream out;
  out << "revision " << bank.revision << ", " << bank.questions.size() << " question(s)\n";
  for (std::size_t i = 0; i < bank.questions.size(); ++i) {
    const auto& q = bank.questions[i];
    out << i + 1 << ". " << q.text << "  [" << q.id << "]\n";
    for (const auto& a : assign_segment_colors(q)) {
      out << "   segment " << a.segment << " " << to_string(a.color) << ": " << a.text;
      if (q.answers[static_cast<std::size_t>(a.segment)].is_correct) out << "  (correct)";
      out << "\n";
    }
  }
  return out.str();
}

int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Author quiz questions offline, sync them to the hub and run sessions", "edu-teacher"};
  app.require_subcommand(1);

  std::string hub = "http://127.0.0.1:8080";
  if (const char* env = std::getenv("INTERACTIVE_EDU_HUB"); env != nullptr && *env != '\0') hub = env;
  std::string bank = "questions.json";
  app.add_option("--hub", hub, "Hub base URL")->capture_default_str();
  app.add_option("--bank", bank, "Local question bank file")->capture_default_str();

  std::string username, password;
  auto* reg = app.add_subcommand("register", "Create a teacher account on the hub");
  reg->add_option("--username,-u", username)->required();
  reg->add_option("--password,-p", password, "Read from stdin when omitted");
  auto* login = app.add_subcommand("login", "Log in and cache a bearer token");
  login->add_option("--username,-u", username)->required();
  login->add_option("--password,-p", password, "Read from stdin when omitted");

  std::string text;
  std::vector<std::string> answers;
  auto* add = app.add_subcommand("add", "Add a question to the local bank");
  add->add_option("--text,-t", text, "Question text")->required();
  add->add_option("--answer,-a", answers, "Answer text; suffix ':correct' marks the right one")->required();

  app.add_subcommand("list", "Show the local bank with segment colors");

  std::string remove_id;
  auto* remove = app.add_subcommand("remove", "Remove a question locally and queue its deletion");
  remove->add_option("id", remove_id)->required();

  app.add_subcommand("sync", "Push local questions and queued deletions to the hub");

  bool shuffle = false, retry = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> hold, debounce;
  auto* start = app.add_subcommand("start", "Start a quiz session");
  start->add_flag("--shuffle", shuffle, "Shuffle question order");
  start->add_option("--seed", seed, "Shuffle seed");
  start->add_flag("--retry", retry, "Repeat a question until answered correctly");
  start->add_option("--hold", hold, "Feedback hold in ms");
  start->add_option("--debounce", debounce, "Press debounce in ms");

  app.add_subcommand("stop", "Stop the running session and print its summary");
  app.add_subcommand("status", "Show session progress");

  bool follow = false;
  auto* watch = app.add_subcommand("watch", "Stream the live session as an observer");
  watch->add_flag("--follow", follow, "Keep watching after a session finishes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_code::ok : exit_code::usage;
  }

  Context ctx{hub, bank, default_credentials_path(), in, out, err};
  try {
    const auto* sub = app.get_subcommands().front();
    const auto& name = sub->get_name();
    if (name == "register") {
      cmd_register(ctx, username, password);
    } else if (name == "login") {
      cmd_login(ctx, username, password);
    } else if (name == "add") {
      cmd_add(ctx, text, answers);
    } else if (name == "list") {
      out << format_bank(load_local_bank(ctx.bank));
    } else if (name == "remove") {
      cmd_remove(ctx, remove_id);
    } else if (name == "sync") {
      cmd_sync(ctx);
    } else if (name == "start") {
      cmd_start(ctx, shuffle, seed, retry, hold, debounce);
    } else if (name == "stop") {
      cmd_stop(ctx);
    } else if (name == "status") {
      cmd_status(ctx);
    } else if (name == "watch") {
      cmd_watch(ctx, follow);
    }
  } catch (const CliFailure& e) {
    err << "error: " << e.what() << "\n";
    return e.code();
  } catch (const StoreError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::usage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::usage;
  }
  return exit_code::ok;
}

}  // namespace edu::teacher
