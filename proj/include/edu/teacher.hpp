#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "edu/model.hpp"

namespace edu::teacher {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int usage = 1;
inline constexpr int validation = 2;
inline constexpr int auth = 3;
inline constexpr int connectivity = 4;
inline constexpr int conflict = 5;
inline constexpr int not_found = 6;
}  // namespace exit_code

/// Sync bookkeeping kept next to the local bank file (`<bank>.sync.json`).
struct SyncState {
  std::vector<std::string> pending_deletions;
  std::optional<std::int64_t> server_revision;

  bool operator==(const SyncState&) const = default;
};

struct Credentials {
  std::string hub;
  std::string username;
  std::string token;
  UtcMillis expires_at = 0;
};

std::filesystem::path sync_state_path(const std::filesystem::path& bank_file);
/// INTERACTIVE_EDU_CREDENTIALS, else $HOME/.config/interactive-edu/credentials.json.
std::filesystem::path default_credentials_path();

QuestionBank load_local_bank(const std::filesystem::path& path);
void save_local_bank(const QuestionBank& bank, const std::filesystem::path& path);
SyncState load_sync_state(const std::filesystem::path& bank_file);
void save_sync_state(const SyncState& state, const std::filesystem::path& bank_file);

/// `"text"` or `"text:correct"`.
Answer parse_answer_spec(const std::string& spec);

/// Human-readable bank listing with segment colors, in bank order.
std::string format_bank(const QuestionBank& bank);

/// Entry point shared by the `edu-teacher` binary and the tests.
int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace edu::teacher
