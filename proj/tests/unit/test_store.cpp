#include <doctest.h>

#include <fstream>
#include <sstream>

#include "edu/store.hpp"
#include "fixtures.hpp"
#include "temp_dir.hpp"

using namespace edu;
namespace fs = std::filesystem;

namespace {

Store sample_store() {
  Store s;
  s.teachers.push_back({"ada", "$argon2id$v=19$m=65536,t=2,p=1$c2FsdA$aGFzaA", 1000});
  s.teachers.push_back({"grace", "$argon2id$v=19$m=65536,t=2,p=1$c2FsdDI$aGFzaDI", 2000});
  s.bank = testing::three_question_bank();
  s.bank.revision = 4;
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("store") {
  TEST_CASE("missing file loads as an empty store") {
    testing::TempDir dir;
    auto s = load_store(dir / "absent.json");
    CHECK(s.teachers.empty());
    CHECK(s.bank.questions.empty());
    CHECK(s.bank.revision == 0);
  }

  TEST_CASE("persist then load round-trips teachers and bank") {
    testing::TempDir dir;
    const auto path = dir / "store.json";
    const auto original = sample_store();
    persist_store(original, path);
    CHECK(load_store(path) == original);
    REQUIRE(load_store(path).find_teacher("grace") != nullptr);
    CHECK(load_store(path).find_teacher("nobody") == nullptr);
  }

  TEST_CASE("store file is owner read/write only and leaves no temp file") {
    testing::TempDir dir;
    const auto path = dir / "store.json";
    persist_store(sample_store(), path);
    const auto perms = fs::status(path).permissions();
    CHECK((perms & (fs::perms::group_all | fs::perms::others_all)) == fs::perms::none);
    int entries = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir.path())) ++entries;
    CHECK(entries == 1);
  }

  TEST_CASE("overwrite replaces contents") {
    testing::TempDir dir;
    const auto path = dir / "store.json";
    persist_store(sample_store(), path);
    Store empty;
    persist_store(empty, path);
    CHECK(load_store(path) == empty);
  }

  TEST_CASE("truncated file is an error, not an empty store") {
    testing::TempDir dir;
    const auto path = dir / "store.json";
    persist_store(sample_store(), path);
    auto text = slurp(path);
    {
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      out << text.substr(0, text.size() / 2);
    }
    CHECK_THROWS_AS(load_store(path), StoreError);
    try {
      load_store(path);
    } catch (const StoreError& e) {
      CHECK(e.kind() == StoreError::Kind::Parse);
    }
  }

  TEST_CASE("invalid bank content in the store is rejected") {
    auto doc = Json::parse(serialize_store(sample_store()));
    doc["bank"]["questions"][0]["answers"][0]["is_correct"] = true;
    CHECK_FALSE(parse_store(doc.dump()).has_value());

    auto dup = Json::parse(serialize_store(sample_store()));
    dup["teachers"][1]["username"] = "ada";
    CHECK_FALSE(parse_store(dup.dump()).has_value());

    auto fmt = Json::parse(serialize_store(sample_store()));
    fmt["format"] = 999;
    CHECK_FALSE(parse_store(fmt.dump()).has_value());
  }

  TEST_CASE("unwritable destination reports an I/O error") {
    testing::TempDir dir;
    CHECK_THROWS_AS(persist_store(sample_store(), dir / "no-such-dir" / "store.json"), StoreError);
  }

  TEST_CASE("property: random stores round-trip through text") {
    std::mt19937_64 rng(77);
    for (int i = 0; i < 300; ++i) {
      Store s;
      s.bank = testing::random_valid_bank(rng);
      const int n = static_cast<int>(rng() % 4);
      for (int t = 0; t < n; ++t) s.teachers.push_back({"user" + std::to_string(t), "hash" + std::to_string(rng()), static_cast<UtcMillis>(rng() % 100000)});
      auto back = parse_store(serialize_store(s));
      REQUIRE(back.has_value());
      CHECK(*back == s);
    }
  }
}
