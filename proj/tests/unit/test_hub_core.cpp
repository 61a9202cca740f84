#include <doctest.h>

#include <deque>

#include "edu/hub.hpp"
#include "fixtures.hpp"
#include "temp_dir.hpp"

using namespace edu;
using namespace edu::hub;

namespace {

struct RecordingSink : OutboundSink {
  std::map<ConnectionId, std::deque<std::string>> frames;
  std::vector<ConnectionId> closed;
  std::vector<std::optional<UtcMillis>> ticks;

  void send(ConnectionId id, std::string frame) override { frames[id].push_back(std::move(frame)); }
  void close(ConnectionId id) override { closed.push_back(id); }
  void schedule_tick(std::optional<UtcMillis> deadline) override { ticks.push_back(deadline); }

  std::string pop(ConnectionId id) {
    auto& q = frames[id];
    REQUIRE_FALSE(q.empty());
    auto f = std::move(q.front());
    q.pop_front();
    return f;
  }
  Json pop_json(ConnectionId id) { return Json::parse(pop(id)); }
  bool idle(ConnectionId id) { return frames[id].empty(); }
};

struct Fixture {
  RecordingSink sink;
  UtcMillis now = 1'000'000;
  std::vector<Json> logs;
  HubCore core;

  explicit Fixture(std::filesystem::path store_path = {}, Store initial = {})
      : core(
            [&] {
              HubOptions o;
              o.store_path = std::move(store_path);
              o.token_ttl_ms = 60'000;
              o.hash_cost = auth::HashCost::minimum();
              o.clock = [this] { return now; };
              o.log = [this](const Json& j) { logs.push_back(j); };
              return o;
            }(),
            std::move(initial), sink) {}

  HttpResponse http(std::string method, std::string target, std::string body = {}, std::string token = {}) {
    return core.handle_http({std::move(method), std::move(target), token.empty() ? "" : "Bearer " + token, std::move(body)});
  }

  std::string login(const std::string& user = "ada", const std::string& pw = "pw") {
    http("POST", "/api/teachers/register", Json{{"username", user}, {"password", pw}}.dump());
    auto r = http("POST", "/api/teachers/login", Json{{"username", user}, {"password", pw}}.dump());
    REQUIRE(r.status == 200);
    return Json::parse(r.body)["token"].get<std::string>();
  }

  void sync_three(const std::string& token) {
    Json body{{"questions", bank_to_json(testing::three_question_bank())["questions"]}};
    REQUIRE(http("POST", "/api/sync", body.dump(), token).status == 200);
  }

  void join(ConnectionId id, std::string_view role) {
    core.on_open(id);
    core.on_frame(id, R"({"type":"hello","role":")" + std::string(role) + "\"}");
    CHECK(Json::parse(sink.pop(id))["type"] == "welcome");
  }
};

Json body_of(const HttpResponse& r) { return Json::parse(r.body); }

}  // namespace

TEST_SUITE("hub http") {
  TEST_CASE("register, login, sync happy path") {
    Fixture f;
    auto reg = f.http("POST", "/api/teachers/register", R"({"username":"ada","password":"s3cret"})");
    CHECK(reg.status == 201);
    auto login = f.http("POST", "/api/teachers/login", R"({"username":"ada","password":"s3cret"})");
    REQUIRE(login.status == 200);
    const auto token = body_of(login)["token"].get<std::string>();
    CHECK(body_of(login)["expires_at"] == f.now + 60'000);

    auto sync = f.http("POST", "/api/sync", R"({"questions":[],"deletions":[]})", token);
    CHECK(sync.status == 200);
    CHECK(body_of(sync)["revision"] == 0);
    CHECK(f.core.store_snapshot().teachers.at(0).password_hash.rfind("$argon2id$", 0) == 0);
  }

  TEST_CASE("duplicate username and bad credentials") {
    Fixture f;
    f.http("POST", "/api/teachers/register", R"({"username":"ada","password":"a"})");
    auto dup = f.http("POST", "/api/teachers/register", R"({"username":"ada","password":"b"})");
    CHECK(dup.status == 409);
    CHECK(body_of(dup)["error"] == "duplicate_username");
    CHECK(f.http("POST", "/api/teachers/login", R"({"username":"ada","password":"b"})").status == 401);
    CHECK(f.http("POST", "/api/teachers/login", R"({"username":"bob","password":"a"})").status == 401);
    CHECK(f.http("POST", "/api/teachers/register", R"({"username":"","password":"a"})").status == 400);
    CHECK(f.http("POST", "/api/teachers/register", "{").status == 400);
  }

  TEST_CASE("protected routes reject missing, bogus and expired tokens before touching state") {
    Fixture f;
    const auto token = f.login();
    f.sync_three(token);
    const auto before = f.core.store_snapshot();

    const Json del{{"deletions", {"q1"}}};
    for (const std::string& bad : {std::string(), std::string("nope")}) {
      CHECK(f.http("POST", "/api/sync", del.dump(), bad).status == 401);
      CHECK(f.http("DELETE", "/api/questions/q1", "", bad).status == 401);
      CHECK(f.http("GET", "/api/questions", "", bad).status == 401);
      CHECK(f.http("POST", "/api/session/start", "", bad).status == 401);
      CHECK(f.http("POST", "/api/session/stop", "", bad).status == 401);
    }
    f.now += 60'000;
    CHECK(f.http("POST", "/api/sync", del.dump(), token).status == 401);
    CHECK(f.core.store_snapshot() == before);
    CHECK_FALSE(f.core.session_snapshot().has_value());
  }

  TEST_CASE("routing errors") {
    Fixture f;
    const auto token = f.login();
    CHECK(f.http("GET", "/api/nothing", "", token).status == 404);
    CHECK(f.http("GET", "/api/sync", "", token).status == 405);
    CHECK(f.http("GET", "/api/teachers/login").status == 405);
    CHECK(f.http("POST", "/api/session").status == 405);
  }

  TEST_CASE("sync validation failure reports every error and changes nothing") {
    Fixture f;
    const auto token = f.login();
    f.sync_three(token);
    const auto before = f.core.store_snapshot();
    auto bad = testing::make_question("q9", "", {"only"}, -1);
    Json body{{"questions", {question_to_json(testing::three_question_bank().questions[0]), question_to_json(bad)}}};
    auto r = f.http("POST", "/api/sync", body.dump(), token);
    CHECK(r.status == 400);
    const auto j = body_of(r);
    CHECK(j["error"] == "validation_failed");
    CHECK(j["errors"].size() >= 2);
    for (const auto& e : j["errors"]) CHECK(e["question_id"] == "q9");
    CHECK(f.core.store_snapshot() == before);
  }

  TEST_CASE("sync with a malformed shape is a 400 with a path") {
    Fixture f;
    const auto token = f.login();
    auto r = f.http("POST", "/api/sync", R"({"questions":[{"id":"x","text":"t","answers":"no"}]})", token);
    CHECK(r.status == 400);
    CHECK(body_of(r)["error"] == "malformed_body");
    CHECK(body_of(r)["detail"].get<std::string>().find("/questions/0/answers") != std::string::npos);
  }

  TEST_CASE("repeat sync is idempotent and GET returns the bank") {
    Fixture f;
    const auto token = f.login();
    f.sync_three(token);
    auto first = f.http("GET", "/api/questions", "", token);
    f.sync_three(token);
    auto second = f.http("GET", "/api/questions", "", token);
    CHECK(first.body == second.body);
    CHECK(body_of(first)["revision"] == 1);
    CHECK(body_of(first)["questions"].size() == 3);
  }

  TEST_CASE("delete by id") {
    Fixture f;
    const auto token = f.login();
    f.sync_three(token);
    auto r = f.http("DELETE", "/api/questions/q2", "", token);
    CHECK(r.status == 200);
    CHECK(body_of(r)["revision"] == 2);
    CHECK(f.http("DELETE", "/api/questions/q2", "", token).status == 404);
    CHECK(f.core.store_snapshot().bank.questions.size() == 2);
  }

  TEST_CASE("store mutations are persisted before the reply") {
    testing::TempDir dir;
    const auto path = dir / "store.json";
    {
      Fixture f(path);
      const auto token = f.login();
      f.sync_three(token);
    }
    const auto reloaded = load_store(path);
    CHECK(reloaded.teachers.size() == 1);
    CHECK(reloaded.bank == [] {
      auto b = testing::three_question_bank();
      b.revision = 1;
      return b;
    }());
  }

  TEST_CASE("session start, status and stop") {
    Fixture f;
    const auto token = f.login();
    CHECK(body_of(f.http("GET", "/api/session")) == Json::parse(R"({"phase":"idle","index":0,"total":0,"correct_count":0})"));
    auto empty = f.http("POST", "/api/session/start", "", token);
    CHECK(empty.status == 409);

    f.sync_three(token);
    auto r = f.http("POST", "/api/session/start", R"({"order":"shuffled","shuffle_seed":42,"wrong_policy":"retry","feedback_hold_ms":100})", token);
    REQUIRE(r.status == 200);
    CHECK(body_of(r)["shuffle_seed"] == 42);
    CHECK(body_of(r)["total"] == 3);
    CHECK(body_of(r)["wrong_policy"] == "retry");
    CHECK(f.http("POST", "/api/session/start", "", token).status == 409);

    auto status = body_of(f.http("GET", "/api/session"));
    CHECK(status["phase"] == "presenting");
    CHECK(status["index"] == 1);

    auto stop = f.http("POST", "/api/session/stop", "", token);
    CHECK(stop.status == 200);
    CHECK(body_of(stop)["total"] == 3);
    CHECK(f.http("POST", "/api/session/stop", "", token).status == 409);
  }

  TEST_CASE("bad session config is rejected") {
    Fixture f;
    const auto token = f.login();
    f.sync_three(token);
    CHECK(f.http("POST", "/api/session/start", R"({"feedback_hold_ms":0})", token).status == 400);
    CHECK(f.http("POST", "/api/session/start", R"({"press_debounce_ms":-1})", token).status == 400);
    CHECK(f.http("POST", "/api/session/start", R"({"order":"random"})", token).status == 400);
    CHECK(f.http("POST", "/api/session/start", R"({"shuffle_seed":-3})", token).status == 400);
    CHECK_FALSE(f.core.session_snapshot().has_value());
  }

  TEST_CASE("mutations are logged") {
    Fixture f;
    f.login();
    bool saw = false;
    for (const auto& l : f.logs) saw |= l.value("event", "") == "http" && l.value("status", 0) == 201;
    CHECK(saw);
  }
}

TEST_SUITE("hub websocket") {
  TEST_CASE("first frame must be hello") {
    Fixture f;
    f.core.on_open(1);
    f.core.on_frame(1, R"({"type":"press","segment":0})");
    CHECK(f.sink.pop_json(1)["code"] == "protocol_violation");
    CHECK(f.sink.closed == std::vector<ConnectionId>{1});
  }

  TEST_CASE("malformed frame before hello closes, after hello does not") {
    Fixture f;
    f.core.on_open(1);
    f.core.on_frame(1, "garbage");
    CHECK(f.sink.pop_json(1)["code"] == "malformed_frame");
    CHECK(f.sink.closed.size() == 1);

    f.join(2, "floor");
    f.core.on_frame(2, "{]");
    CHECK(f.sink.pop_json(2)["code"] == "malformed_frame");
    CHECK(f.sink.closed.size() == 1);
  }

  TEST_CASE("press from a screen is a role violation and changes nothing") {
    Fixture f;
    const auto token = f.login();
    f.sync_three(token);
    f.join(1, "screen");
    f.http("POST", "/api/session/start", "", token);
    f.sink.pop(1);
    const auto before = f.core.session_snapshot();
    f.core.on_frame(1, R"({"type":"press","segment":1})");
    CHECK(f.sink.pop_json(1)["code"] == "role_violation");
    CHECK(f.core.session_snapshot() == before);
  }

  TEST_CASE("role is fixed and hub-only messages are refused") {
    Fixture f;
    f.join(1, "floor");
    f.core.on_frame(1, R"({"type":"hello","role":"screen"})");
    CHECK(f.sink.pop_json(1)["code"] == "protocol_violation");
    f.core.on_frame(1, R"({"type":"finished","correct_count":0,"total":0})");
    CHECK(f.sink.pop_json(1)["code"] == "protocol_violation");
  }

  TEST_CASE("out-of-range segment") {
    Fixture f;
    f.join(1, "floor");
    f.core.on_frame(1, R"({"type":"press","segment":4})");
    CHECK(f.sink.pop_json(1)["code"] == "segment_out_of_range");
  }

  TEST_CASE("no session: presses are ignored and no tick is scheduled") {
    Fixture f;
    f.join(1, "floor");
    f.join(2, "screen");
    f.core.on_frame(1, R"({"type":"press","segment":0})");
    CHECK(f.sink.idle(1));
    CHECK(f.sink.idle(2));
    for (const auto& t : f.sink.ticks) CHECK_FALSE(t.has_value());
    CHECK_FALSE(f.core.next_deadline().has_value());
  }

  TEST_CASE("routing: questions to displays, feedback to everyone") {
    Fixture f;
    const auto token = f.login();
    f.sync_three(token);
    f.join(1, "floor");
    f.join(2, "screen");
    f.join(3, "screen");
    f.join(4, "observer");
    REQUIRE(f.http("POST", "/api/session/start", "", token).status == 200);
    CHECK(f.sink.idle(1));
    for (ConnectionId id : {2, 3, 4}) {
      auto q = f.sink.pop_json(id);
      CHECK(q["type"] == "question");
      CHECK(q["index"] == 1);
      CHECK(q.dump().find("is_correct") == std::string::npos);
    }

    f.core.on_frame(1, R"({"type":"press","segment":1})");
    const std::string expected = R"({"type":"feedback","correct":true,"segment":1,"message":"Correct!"})";
    for (ConnectionId id : {1, 2, 3, 4}) CHECK(f.sink.pop(id) == expected);
    CHECK(f.sink.ticks.back() == f.now + 2000);
    CHECK(f.core.next_deadline() == f.now + 2000);

    f.now += 2000;
    f.core.on_tick();
    CHECK(f.sink.idle(1));
    for (ConnectionId id : {2, 3, 4}) CHECK(f.sink.pop_json(id)["index"] == 2);
    CHECK_FALSE(f.sink.ticks.back().has_value());
  }

  TEST_CASE("early tick does nothing") {
    Fixture f;
    const auto token = f.login();
    f.sync_three(token);
    f.join(1, "floor");
    f.join(2, "screen");
    f.http("POST", "/api/session/start", "", token);
    f.sink.pop(2);
    f.core.on_frame(1, R"({"type":"press","segment":0})");
    f.sink.pop(1);
    f.sink.pop(2);
    f.now += 1999;
    f.core.on_tick();
    CHECK(f.sink.idle(2));
  }

  TEST_CASE("late joiner sees the current question") {
    Fixture f;
    const auto token = f.login();
    f.sync_three(token);
    f.http("POST", "/api/session/start", "", token);
    f.join(7, "screen");
    CHECK(f.sink.pop_json(7)["text"] == "2+2?");
  }

  TEST_CASE("closed connections stop receiving") {
    Fixture f;
    const auto token = f.login();
    f.sync_three(token);
    f.join(1, "screen");
    f.core.on_close(1);
    CHECK(f.core.connection_count() == 0);
    f.http("POST", "/api/session/start", "", token);
    CHECK(f.sink.idle(1));
  }

  TEST_CASE("full three-question run produces the expected summary") {
    Fixture f;
    const auto token = f.login();
    f.sync_three(token);
    f.join(1, "floor");
    f.join(2, "screen");
    f.http("POST", "/api/session/start", "", token);
    f.sink.pop(2);
    const int presses[] = {1, 0, 0};
    for (int seg : presses) {
      f.core.on_frame(1, R"({"type":"press","segment":)" + std::to_string(seg) + "}");
      f.sink.pop(1);
      f.sink.pop(2);
      f.now += 2000;
      f.core.on_tick();
      f.now += 500;
    }
    // the last tick emitted "finished" instead of another question
    std::string last;
    while (!f.sink.idle(2)) last = f.sink.pop(2);
    CHECK(last == R"({"type":"finished","correct_count":2,"total":3})");
    CHECK(body_of(f.http("GET", "/api/session"))["phase"] == "finished");
    auto stop = body_of(f.http("POST", "/api/session/stop", "", token));
    CHECK(stop["correct_count"] == 2);
    CHECK(stop["entries"].size() == 3);
  }
}
