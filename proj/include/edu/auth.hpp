#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

#include "edu/model.hpp"

namespace edu::auth {

/// Argon2id via libsodium's crypto_pwhash_str. The encoded result embeds a random
/// 16-byte salt and the cost parameters, so verification needs nothing else.
struct HashCost {
  std::uint64_t ops_limit;
  std::size_t mem_limit;

  /// 2 passes over 64 MiB.
  static HashCost interactive();
  /// Library minimum. Only for tests that hash in tight loops.
  static HashCost minimum();
};

std::string hash_password(std::string_view password, const HashCost& cost = HashCost::interactive());
bool verify_password(std::string_view encoded_hash, std::string_view password);

/// 32 random bytes, hex encoded (256 bits of entropy).
std::string random_token();

std::uint64_t random_u64();

struct AuthToken {
  std::string token;
  std::string teacher;
  UtcMillis expires_at = 0;
};

/// In-memory bearer tokens. A restart invalidates every token.
class TokenRegistry {
 public:
  explicit TokenRegistry(std::int64_t ttl_ms) : ttl_ms_(ttl_ms) {}

  AuthToken issue(const std::string& teacher, UtcMillis now);

  /// The teacher owning `token`, if it exists and now < expires_at.
  [[nodiscard]] std::optional<std::string> validate(std::string_view token, UtcMillis now);

  [[nodiscard]] std::int64_t ttl_ms() const noexcept { return ttl_ms_; }
  [[nodiscard]] std::size_t size() const noexcept { return tokens_.size(); }

 private:
  void purge(UtcMillis now);

  std::int64_t ttl_ms_;
  std::unordered_map<std::string, AuthToken> tokens_;
};

/// Extracts the token from an `Authorization: Bearer <token>` header value.
std::optional<std::string_view> bearer_token(std::string_view authorization_header);

}  // namespace edu::auth
