#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "edu/model.hpp"

namespace edu {

/// Everything the hub keeps across restarts. Tokens and session logs are not stored.
struct Store {
  std::vector<TeacherAccount> teachers;
  QuestionBank bank;

  bool operator==(const Store&) const = default;

  [[nodiscard]] const TeacherAccount* find_teacher(std::string_view username) const;
};

class StoreError : public std::runtime_error {
 public:
  enum class Kind { Io, Parse };

  StoreError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  [[nodiscard]] Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

std::string serialize_store(const Store& store);
Expected<Store, BankError> parse_store(std::string_view document);

/// Writes a sibling temp file, fsyncs it, renames it over `path`, then fsyncs the directory.
void atomic_write_file(const std::filesystem::path& path, std::string_view contents,
                       std::filesystem::perms mode = std::filesystem::perms::owner_read |
                                                     std::filesystem::perms::owner_write);

void persist_store(const Store& store, const std::filesystem::path& path);

/// An absent file is an empty store. Anything unreadable or malformed throws StoreError.
Store load_store(const std::filesystem::path& path);

}  // namespace edu
