#include "edu/hub.hpp"

#include <chrono>
#include <limits>

namespace edu::hub {

namespace {

HttpResponse reply(int status, const Json& body) { return {status, body.dump()}; }

HttpResponse error_reply(int status, std::string_view code, std::string_view detail = {}) {
  Json body;
  body["error"] = std::string(code);
  if (!detail.empty()) body["detail"] = std::string(detail);
  return reply(status, body);
}

Expected<Json, HttpResponse> parse_object(std::string_view body, bool allow_empty = false) {
  if (allow_empty && body.find_first_not_of(" \t\r\n") == std::string_view::npos) return Json::object();
  try {
    auto j = Json::parse(body);
    if (!j.is_object()) return unexpected(error_reply(400, "malformed_body", "expected a JSON object"));
    return j;
  } catch (const Json::parse_error& e) {
    return unexpected(error_reply(400, "malformed_body", e.what()));
  }
}

std::optional<std::string> string_field(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) return std::nullopt;
  return it->get<std::string>();
}

bool is_running(const std::optional<SessionState>& s) {
  return s && (s->phase == Phase::Presenting || s->phase == Phase::Feedback);
}

Json summary_json(const SessionSummary& summary) {
  Json j;
  j["total"] = summary.total;
  j["correct_count"] = summary.correct_count;
  j["entries"] = Json::array();
  for (const auto& e : summary.entries) {
    Json ej;
    ej["question_id"] = e.question_id;
    ej["segment"] = e.segment;
    ej["was_correct"] = e.was_correct;
    ej["at"] = e.at;
    ej["attempt"] = e.attempt;
    j["entries"].push_back(std::move(ej));
  }
  return j;
}

std::string_view strip_query(std::string_view target) {
  return target.substr(0, target.find('?'));
}

constexpr std::string_view kQuestionsPrefix = "/api/questions/";

}  // namespace

UtcMillis system_now() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

HubCore::HubCore(HubOptions options, Store initial, OutboundSink& sink)
    : options_(std::move(options)), sink_(sink), store_(std::move(initial)), tokens_(options_.token_ttl_ms) {
  if (!options_.clock) options_.clock = system_now;
}

void HubCore::log(Json record) const {
  if (options_.log) options_.log(record);
}

// --- WebSocket side -------------------------------------------------------

void HubCore::on_open(ConnectionId id) {
  std::lock_guard lock(mu_);
  connections_[id] = Connection{};
}

void HubCore::on_close(ConnectionId id) {
  std::lock_guard lock(mu_);
  connections_.erase(id);
}

void HubCore::send_locked(ConnectionId id, const wire::Message& message) {
  sink_.send(id, wire::encode(message));
}

void HubCore::on_frame(ConnectionId id, std::string_view frame) {
  std::lock_guard lock(mu_);
  auto conn = connections_.find(id);
  if (conn == connections_.end()) return;
  auto& role = conn->second.role;

  auto decoded = wire::decode(frame);
  if (!decoded) {
    send_locked(id, wire::Error{std::string(wire::error_code::malformed_frame), decoded.error().detail});
    if (!role) sink_.close(id);
    return;
  }

  if (const auto* hello = std::get_if<wire::Hello>(&*decoded)) {
    if (role && *role != hello->role) {
      send_locked(id, wire::Error{std::string(wire::error_code::protocol_violation),
                                  "role is fixed at hello time"});
      return;
    }
    role = hello->role;
    send_locked(id, wire::Welcome{hello->role});
    // Late-joining displays get the question currently on screen.
    if (hello->role != wire::ClientRole::floor && is_running(session_)) {
      send_locked(id, make_question_posted(*session_));
    }
    log({{"event", "hello"}, {"conn", id}, {"role", std::string(wire::to_string(hello->role))}});
    return;
  }

  if (!role) {
    send_locked(id, wire::Error{std::string(wire::error_code::protocol_violation), "first frame must be hello"});
    sink_.close(id);
    return;
  }

  const auto* press = std::get_if<wire::Press>(&*decoded);
  if (press == nullptr) {
    send_locked(id, wire::Error{std::string(wire::error_code::protocol_violation),
                                std::string("clients may not send '") + std::string(wire::type_name(*decoded)) +
                                    "'"});
    return;
  }
  if (*role != wire::ClientRole::floor) {
    send_locked(id, wire::Error{std::string(wire::error_code::role_violation), "only floor clients may press"});
    return;
  }

  const auto now = options_.clock();
  Json entry{{"event", "press"}, {"conn", id}, {"segment", press->segment}, {"at", now}};
  if (!session_) {
    if (press->segment < 0 || press->segment >= kSegmentCount) {
      send_locked(id, wire::Error{std::string(wire::error_code::segment_out_of_range),
                                  "segment must be 0.." + std::to_string(kSegmentCount - 1)});
      return;
    }
    entry["accepted"] = false;
    log(std::move(entry));
    return;
  }

  auto result = handle_press(*session_, press->segment, now);
  if (!result) {
    send_locked(id, wire::Error{std::string(wire::error_code::segment_out_of_range),
                                "segment must be 0.." + std::to_string(kSegmentCount - 1)});
    return;
  }
  entry["accepted"] = !result->events.empty();
  log(std::move(entry));
  session_ = std::move(result->state);
  broadcast_locked(result->events);
  reschedule_locked();
}

void HubCore::on_tick() {
  std::lock_guard lock(mu_);
  if (!session_) {
    sink_.schedule_tick(std::nullopt);
    return;
  }
  auto t = tick(std::move(*session_), options_.clock());
  session_ = std::move(t.state);
  broadcast_locked(t.events);
  reschedule_locked();
}

void HubCore::broadcast_locked(const SessionEvents& events) {
  for (const auto& ev : events) {
    const auto message = wire::from_event(ev);
    const auto frame = wire::encode(message);
    const bool to_floor = std::holds_alternative<FeedbackIssued>(ev);
    if (const auto* fb = std::get_if<FeedbackIssued>(&ev)) {
      log({{"event", "feedback"}, {"correct", fb->correct}, {"segment", fb->segment}, {"message", fb->message}});
    }
    for (const auto& [id, conn] : connections_) {
      if (!conn.role) continue;
      if (*conn.role == wire::ClientRole::floor && !to_floor) continue;
      sink_.send(id, frame);
    }
  }
}

void HubCore::reschedule_locked() {
  if (session_ && session_->phase == Phase::Feedback && session_->feedback_until) {
    sink_.schedule_tick(session_->feedback_until);
  } else {
    sink_.schedule_tick(std::nullopt);
  }
}

// --- HTTP side ------------------------------------------------------------

HttpResponse HubCore::handle_http(const HttpRequest& request) {
  HttpResponse response;
  try {
    response = route(request);
  } catch (const StoreError& e) {
    response = error_reply(500, "store_failure", e.what());
  } catch (const std::exception& e) {
    response = error_reply(500, "internal_error", e.what());
  }
  if (request.method != "GET") {
    log({{"event", "http"},
         {"method", request.method},
         {"path", std::string(strip_query(request.target))},
         {"status", response.status}});
  }
  return response;
}

HttpResponse HubCore::route(const HttpRequest& request) {
  const auto path = strip_query(request.target);
  const auto& method = request.method;

  auto expect = [&](std::string_view wanted) { return method == wanted; };
  auto wrong_method = [&] { return error_reply(405, "method_not_allowed", method + " " + std::string(path)); };

  if (path == "/api/teachers/register") return expect("POST") ? register_teacher(request) : wrong_method();
  if (path == "/api/teachers/login") return expect("POST") ? login(request) : wrong_method();
  if (path == "/api/session") return expect("GET") ? status() : wrong_method();

  const bool known = path == "/api/sync" || path == "/api/questions" || path == "/api/session/start" ||
                     path == "/api/session/stop" ||
                     (path.starts_with(kQuestionsPrefix) && path.size() > kQuestionsPrefix.size());
  if (!known) return error_reply(404, "not_found", path);

  auto teacher = authenticate(request);
  if (!teacher) return error_reply(401, "unauthorized", "missing, unknown or expired bearer token");

  if (path == "/api/sync") return expect("POST") ? sync(request, *teacher) : wrong_method();
  if (path == "/api/questions") return expect("GET") ? list_questions() : wrong_method();
  if (path == "/api/session/start") return expect("POST") ? start(request, *teacher) : wrong_method();
  if (path == "/api/session/stop") return expect("POST") ? stop(*teacher) : wrong_method();
  if (!expect("DELETE")) return wrong_method();
  return delete_question(path.substr(kQuestionsPrefix.size()), *teacher);
}

std::optional<std::string> HubCore::authenticate(const HttpRequest& request) {
  auto token = auth::bearer_token(request.authorization);
  if (!token) return std::nullopt;
  std::lock_guard lock(mu_);
  return tokens_.validate(*token, options_.clock());
}

void HubCore::commit_store_locked(Store next) {
  if (!options_.store_path.empty()) persist_store(next, options_.store_path);
  store_ = std::move(next);
}

HttpResponse HubCore::register_teacher(const HttpRequest& request) {
  auto body = parse_object(request.body);
  if (!body) return body.error();
  auto username = string_field(*body, "username");
  auto password = string_field(*body, "password");
  if (!username || username->find_first_not_of(" \t\r\n") == std::string::npos) {
    return error_reply(400, "malformed_body", "username must be a non-empty string");
  }
  if (!password || password->empty()) return error_reply(400, "malformed_body", "password must be a non-empty string");

  {
    std::lock_guard lock(mu_);
    if (store_.find_teacher(*username)) return error_reply(409, "duplicate_username", *username);
  }
  // Hashing is deliberately slow; keep it outside the lock.
  auto hash = auth::hash_password(*password, options_.hash_cost);

  std::lock_guard lock(mu_);
  if (store_.find_teacher(*username)) return error_reply(409, "duplicate_username", *username);
  Store next = store_;
  next.teachers.push_back({*username, std::move(hash), options_.clock()});
  commit_store_locked(std::move(next));
  log({{"event", "teacher_registered"}, {"username", *username}});
  return reply(201, Json{{"username", *username}});
}

HttpResponse HubCore::login(const HttpRequest& request) {
  auto body = parse_object(request.body);
  if (!body) return body.error();
  auto username = string_field(*body, "username");
  auto password = string_field(*body, "password");
  if (!username || !password) return error_reply(400, "malformed_body", "username and password are required");

  std::string stored_hash;
  {
    std::lock_guard lock(mu_);
    if (const auto* t = store_.find_teacher(*username)) stored_hash = t->password_hash;
  }
  if (stored_hash.empty() || !auth::verify_password(stored_hash, *password)) {
    return error_reply(401, "invalid_credentials");
  }

  std::lock_guard lock(mu_);
  auto token = tokens_.issue(*username, options_.clock());
  return reply(200, Json{{"token", token.token}, {"expires_at", token.expires_at}});
}

HttpResponse HubCore::sync(const HttpRequest& request, const std::string& teacher) {
  auto body = parse_object(request.body);
  if (!body) return body.error();

  std::vector<Question> payload;
  std::vector<std::string> deletions;
  if (auto qs = body->find("questions"); qs != body->end()) {
    if (!qs->is_array()) return error_reply(400, "malformed_body", "/questions: expected array");
    for (std::size_t i = 0; i < qs->size(); ++i) {
      auto q = question_from_json((*qs)[i], "/questions/" + std::to_string(i));
      if (!q) return error_reply(400, "malformed_body", q.error().message());
      payload.push_back(std::move(*q));
    }
  }
  if (auto ds = body->find("deletions"); ds != body->end()) {
    if (!ds->is_array()) return error_reply(400, "malformed_body", "/deletions: expected array");
    for (const auto& d : *ds) {
      if (!d.is_string()) return error_reply(400, "malformed_body", "/deletions: expected strings");
      deletions.push_back(d.get<std::string>());
    }
  }

  std::lock_guard lock(mu_);
  auto merged = merge_sync_payload(store_.bank, payload, deletions);
  if (!merged) {
    Json err{{"error", "validation_failed"}, {"errors", to_json(merged.error())}};
    return reply(400, err);
  }
  const bool changed = merged->revision != store_.bank.revision;
  if (changed) {
    Store next = store_;
    next.bank = std::move(*merged);
    commit_store_locked(std::move(next));
  }
  log({{"event", "sync"},
       {"teacher", teacher},
       {"upserts", payload.size()},
       {"deletions", deletions.size()},
       {"revision", store_.bank.revision},
       {"changed", changed}});
  return reply(200, Json{{"revision", store_.bank.revision}});
}

HttpResponse HubCore::list_questions() {
  std::lock_guard lock(mu_);
  return {200, serialize_bank(store_.bank)};
}

HttpResponse HubCore::delete_question(std::string_view id, const std::string& teacher) {
  std::lock_guard lock(mu_);
  if (store_.bank.find(id) == nullptr) return error_reply(404, "unknown_question", id);
  auto merged = merge_sync_payload(store_.bank, {}, {std::string(id)});
  Store next = store_;
  next.bank = std::move(*merged);
  commit_store_locked(std::move(next));
  log({{"event", "delete"}, {"teacher", teacher}, {"question_id", std::string(id)}, {"revision", store_.bank.revision}});
  return reply(200, Json{{"revision", store_.bank.revision}});
}

HttpResponse HubCore::start(const HttpRequest& request, const std::string& teacher) {
  auto body = parse_object(request.body, true);
  if (!body) return body.error();

  SessionConfig config;
  bool seed_given = false;
  try {
    if (auto it = body->find("order"); it != body->end()) {
      const auto v = it->get<std::string>();
      if (v == "shuffled") {
        config.order = QuestionOrder::shuffled;
      } else if (v != "sequential") {
        return error_reply(400, "malformed_body", "order must be 'sequential' or 'shuffled'");
      }
    }
    if (auto it = body->find("shuffle_seed"); it != body->end()) {
      if (!it->is_number_unsigned()) return error_reply(400, "malformed_body", "shuffle_seed must be unsigned");
      config.shuffle_seed = it->get<std::uint64_t>();
      seed_given = true;
    }
    if (auto it = body->find("wrong_policy"); it != body->end()) {
      const auto v = it->get<std::string>();
      if (v == "retry") {
        config.wrong_policy = WrongPolicy::retry;
      } else if (v != "advance") {
        return error_reply(400, "malformed_body", "wrong_policy must be 'advance' or 'retry'");
      }
    }
    if (auto it = body->find("feedback_hold_ms"); it != body->end()) {
      if (!it->is_number_integer() || it->get<std::int64_t>() <= 0) {
        return error_reply(400, "malformed_body", "feedback_hold_ms must be a positive integer");
      }
      config.feedback_hold_ms = it->get<std::int64_t>();
    }
    if (auto it = body->find("press_debounce_ms"); it != body->end()) {
      if (!it->is_number_integer() || it->get<std::int64_t>() < 0) {
        return error_reply(400, "malformed_body", "press_debounce_ms must be a non-negative integer");
      }
      config.press_debounce_ms = it->get<std::int64_t>();
    }
  } catch (const Json::type_error& e) {
    return error_reply(400, "malformed_body", e.what());
  }
  if (config.order == QuestionOrder::shuffled && !seed_given) {
    config.shuffle_seed = auth::random_u64();
  }

  std::lock_guard lock(mu_);
  if (is_running(session_)) return error_reply(409, "session_running");
  auto started = start_session(store_.bank, config, options_.clock());
  if (!started) return error_reply(409, to_string(started.error()));
  session_ = std::move(started->state);
  broadcast_locked(started->events);
  reschedule_locked();
  log({{"event", "session_start"},
       {"teacher", teacher},
       {"total", session_->total()},
       {"order", std::string(to_string(config.order))},
       {"shuffle_seed", config.shuffle_seed},
       {"wrong_policy", std::string(to_string(config.wrong_policy))}});

  Json out{{"phase", std::string(to_string(session_->phase))},
           {"index", 1},
           {"total", session_->total()},
           {"order", std::string(to_string(config.order))},
           {"shuffle_seed", config.shuffle_seed},
           {"wrong_policy", std::string(to_string(config.wrong_policy))},
           {"feedback_hold_ms", config.feedback_hold_ms},
           {"press_debounce_ms", config.press_debounce_ms}};
  return reply(200, out);
}

HttpResponse HubCore::stop(const std::string& teacher) {
  std::lock_guard lock(mu_);
  if (!session_) return error_reply(409, "no_session");
  auto summary = summarize(*session_);
  session_.reset();
  reschedule_locked();
  log({{"event", "session_stop"}, {"teacher", teacher}, {"correct_count", summary.correct_count}, {"total", summary.total}});
  return reply(200, summary_json(summary));
}

HttpResponse HubCore::status() {
  std::lock_guard lock(mu_);
  Json out;
  if (!session_) {
    out = Json{{"phase", "idle"}, {"index", 0}, {"total", 0}, {"correct_count", 0}};
  } else {
    const auto index = std::min<std::size_t>(session_->cursor + 1, session_->question_order.size());
    out = Json{{"phase", std::string(to_string(session_->phase))},
               {"index", index},
               {"total", session_->total()},
               {"correct_count", session_->correct_count}};
  }
  return reply(200, out);
}

// --- introspection --------------------------------------------------------

Store HubCore::store_snapshot() const {
  std::lock_guard lock(mu_);
  return store_;
}

std::optional<SessionState> HubCore::session_snapshot() const {
  std::lock_guard lock(mu_);
  return session_;
}

std::optional<UtcMillis> HubCore::next_deadline() const {
  std::lock_guard lock(mu_);
  if (session_ && session_->phase == Phase::Feedback) return session_->feedback_until;
  return std::nullopt;
}

std::size_t HubCore::connection_count() const {
  std::lock_guard lock(mu_);
  return connections_.size();
}

}  // namespace edu::hub
