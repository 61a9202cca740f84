#include <doctest.h>

#include <fstream>
#include <sstream>

#include "edu/floor_sim.hpp"
#include "edu/teacher.hpp"
#include "edu/ws_client.hpp"
#include "live_hub.hpp"
#include "temp_dir.hpp"

using namespace edu;
using namespace std::chrono_literals;
using edu::client::WsClient;
using edu::testing::LiveHub;

namespace {

std::unique_ptr<WsClient> join(const LiveHub& hub, std::string_view role) {
  auto c = std::make_unique<WsClient>();
  c->connect(hub.ws_url());
  c->send(R"({"type":"hello","role":")" + std::string(role) + "\"}");
  auto w = c->next_frame(5s);
  REQUIRE(w.has_value());
  CHECK(Json::parse(w->text)["type"] == "welcome");
  return c;
}

Json next_json(WsClient& c) {
  auto f = c.next_frame(5s);
  REQUIRE(f.has_value());
  return Json::parse(f->text);
}

}  // namespace

TEST_SUITE("live hub") {
  TEST_CASE("http api over the wire") {
    LiveHub hub;
    const auto token = hub.teacher_token();
    REQUIRE_FALSE(token.empty());
    CHECK(hub.sync_bank(testing::three_question_bank(), token) == 200);
    auto bank = hub.request("GET", "/api/questions", "", token);
    CHECK(bank.status == 200);
    CHECK(bank.body["questions"].size() == 3);
    CHECK(hub.request("GET", "/api/questions").status == 401);
    CHECK(hub.request("DELETE", "/api/questions/q1").status == 401);
  }

  TEST_CASE("fan-out to several screens and the floor") {
    LiveHub hub;
    const auto token = hub.teacher_token();
    hub.sync_bank(testing::three_question_bank(), token);
    auto floor = join(hub, "floor");
    std::vector<std::unique_ptr<WsClient>> screens;
    for (int i = 0; i < 3; ++i) screens.push_back(join(hub, "screen"));

    REQUIRE(hub.request("POST", "/api/session/start", "", token).status == 200);
    for (auto& s : screens) CHECK(next_json(*s)["text"] == "2+2?");

    floor->send(floor::press_frame(1));
    const std::string expected = R"({"type":"feedback","correct":true,"segment":1,"message":"Correct!"})";
    CHECK(floor->next_frame(5s)->text == expected);
    for (auto& s : screens) CHECK(s->next_frame(5s)->text == expected);
  }

  TEST_CASE("protocol errors over the wire") {
    LiveHub hub;
    auto screen = join(hub, "screen");
    screen->send(floor::press_frame(0));
    CHECK(next_json(*screen)["code"] == "role_violation");
    CHECK(screen->is_open());

    WsClient rude;
    rude.connect(hub.ws_url());
    rude.send(floor::press_frame(0));
    CHECK(next_json(rude)["code"] == "protocol_violation");
    CHECK(rude.wait_closed(5s));
  }

  TEST_CASE("static files are served at / and traversal is refused") {
    testing::TempDir dir;
    std::ofstream(dir / "index.html") << "<html>quiz</html>";
    std::ofstream(dir / "app.js") << "console.log(1)";
    hub::ServerConfig cfg;
    cfg.static_dir = dir.path();
    LiveHub hub(cfg);

    httplib::Client cli("127.0.0.1", hub.port());
    auto root = cli.Get("/");
    REQUIRE(root);
    CHECK(root->status == 200);
    CHECK(root->body == "<html>quiz</html>");
    CHECK(root->get_header_value("Content-Type").find("text/html") == 0);
    auto js = cli.Get("/app.js");
    REQUIRE(js);
    CHECK(js->status == 200);
    auto missing = cli.Get("/nope.css");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    auto escape = cli.Get("/../../etc/passwd");
    REQUIRE(escape);
    CHECK(escape->status == 404);
  }
}

TEST_SUITE("floor simulator against a live hub") {
  TEST_CASE("script matching the engine passes") {
    LiveHub hub;
    const auto token = hub.teacher_token();
    hub.sync_bank(testing::three_question_bank(), token);
    REQUIRE(hub.request("POST", "/api/session/start", R"({"feedback_hold_ms":200,"press_debounce_ms":0})", token).status == 200);

    auto script = floor::parse_script("press 1\nexpect feedback correct\nwait 300\npress 0\nexpect feedback wrong\n");
    REQUIRE(script.has_value());
    floor::RunOptions opts;
    opts.hub_url = hub.ws_url();
    auto r = floor::run_script(*script, opts);
    CHECK(r.exit_code == floor::exit_code::ok);
    CHECK(r.message == "");
  }

  TEST_CASE("wrong expectation exits 1 and names the command") {
    LiveHub hub;
    const auto token = hub.teacher_token();
    hub.sync_bank(testing::three_question_bank(), token);
    hub.request("POST", "/api/session/start", "", token);
    auto script = floor::parse_script("press 1\nexpect feedback wrong\n");
    floor::RunOptions opts;
    opts.hub_url = hub.ws_url();
    auto r = floor::run_script(*script, opts);
    CHECK(r.exit_code == floor::exit_code::assertion);
    CHECK(r.failed_command == std::optional<std::size_t>(1));
  }

  TEST_CASE("expect with no session times out as an assertion failure") {
    LiveHub hub;
    auto script = floor::parse_script("press 1\nexpect feedback correct\n");
    floor::RunOptions opts;
    opts.hub_url = hub.ws_url();
    opts.expect_timeout = 300ms;
    CHECK(floor::run_script(*script, opts).exit_code == floor::exit_code::assertion);
  }

  TEST_CASE("unreachable hub exits 2") {
    unsigned short dead_port;
    {
      LiveHub hub;
      dead_port = hub.port();
    }
    floor::RunOptions opts;
    opts.hub_url = "ws://127.0.0.1:" + std::to_string(dead_port) + "/ws";
    opts.connect_timeout = 1000ms;
    auto r = floor::run_script({floor::PressSegment{0}}, opts);
    CHECK(r.exit_code == floor::exit_code::connectivity);
  }
}

TEST_SUITE("teacher cli against a live hub") {
  struct Cli {
    std::string hub;
    std::string bank;
    std::string out, err;

    int run(std::vector<std::string> args, std::string stdin_text = {}) {
      std::vector<std::string> full{"edu-teacher", "--hub", hub, "--bank", bank};
      full.insert(full.end(), args.begin(), args.end());
      std::vector<const char*> argv;
      for (auto& a : full) argv.push_back(a.c_str());
      std::istringstream in(stdin_text);
      std::ostringstream o, e;
      const int rc = teacher::run(static_cast<int>(argv.size()), argv.data(), in, o, e);
      out = o.str();
      err = e.str();
      return rc;
    }
  };

  TEST_CASE("authoring round trip") {
    LiveHub hub;
    testing::TempDir dir;
    ::setenv("INTERACTIVE_EDU_CREDENTIALS", (dir / "creds.json").c_str(), 1);
    Cli cli{hub.http_url(), (dir / "bank.json").string()};

    CHECK(cli.run({"sync"}) == teacher::exit_code::auth);
    CHECK(cli.run({"register", "-u", "ada"}, "pw\n") == 0);
    CHECK(cli.run({"login", "-u", "ada", "-p", "wrong"}) == teacher::exit_code::auth);
    CHECK(cli.run({"login", "-u", "ada"}, "pw\n") == 0);
    const auto creds = std::filesystem::status(dir / "creds.json").permissions();
    CHECK((creds & (std::filesystem::perms::group_all | std::filesystem::perms::others_all)) == std::filesystem::perms::none);
    {
      std::ifstream in(dir / "creds.json");
      std::stringstream ss;
      ss << in.rdbuf();
      CHECK(ss.str().find("\"pw\"") == std::string::npos);
    }

    CHECK(cli.run({"add", "-t", "2+2?", "-a", "3", "-a", "4:correct", "-a", "5"}) == 0);
    CHECK(cli.run({"add", "-t", "Bad", "-a", "x", "-a", "y"}) == teacher::exit_code::validation);
    CHECK(cli.run({"add", "-t", "Sky?", "-a", "blue:correct", "-a", "green"}) == 0);
    CHECK(cli.run({"list"}) == 0);
    CHECK(cli.out.find("segment 1 blue: 4  (correct)") != std::string::npos);

    CHECK(cli.run({"sync"}) == 0);
    CHECK(cli.out.find("server revision 1") != std::string::npos);
    CHECK(cli.run({"sync"}) == 0);
    CHECK(cli.out.find("(unchanged)") != std::string::npos);
    CHECK(hub.core().store_snapshot().bank.questions.size() == 2);

    const auto id = hub.core().store_snapshot().bank.questions[1].id;
    CHECK(cli.run({"remove", id}) == 0);
    CHECK(cli.run({"sync"}) == 0);
    CHECK(hub.core().store_snapshot().bank.questions.size() == 1);
    CHECK(cli.run({"remove", "no-such-id"}) == teacher::exit_code::not_found);

    CHECK(cli.run({"start", "--hold", "100"}) == 0);
    CHECK(cli.run({"start"}) == teacher::exit_code::conflict);
    CHECK(cli.run({"status"}) == 0);
    CHECK(cli.out == "presenting 1/1, 0 correct\n");
    CHECK(cli.run({"stop"}) == 0);
    CHECK(cli.out.find("session stopped: 0/1 correct") == 0);
    CHECK(cli.run({"stop"}) == teacher::exit_code::conflict);
    ::unsetenv("INTERACTIVE_EDU_CREDENTIALS");
  }

  TEST_CASE("unreachable hub exits with the connectivity code") {
    testing::TempDir dir;
    ::setenv("INTERACTIVE_EDU_CREDENTIALS", (dir / "creds.json").c_str(), 1);
    Cli cli{"http://127.0.0.1:1", (dir / "bank.json").string()};
    CHECK(cli.run({"register", "-u", "ada", "-p", "pw"}) == teacher::exit_code::connectivity);
    ::unsetenv("INTERACTIVE_EDU_CREDENTIALS");
  }
}
