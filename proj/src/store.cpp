#include "edu/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace edu {

namespace fs = std::filesystem;

namespace {

constexpr int kStoreFormat = 1;

[[noreturn]] void throw_io(const std::string& what, const fs::path& path) {
  throw StoreError(StoreError::Kind::Io, what + " '" + path.string() + "': " + std::strerror(errno));
}

void write_all(int fd, std::string_view data, const fs::path& path) {
  while (!data.empty()) {
    const auto n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_io("write failed for", path);
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

void fsync_directory(const fs::path& dir) {
  const int fd = ::open(dir.empty() ? "." : dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (fd < 0) return;  // some filesystems refuse directory handles
  ::fsync(fd);
  ::close(fd);
}

Expected<TeacherAccount, ParseError> teacher_from_json(const Json& j, const std::string& path) {
  if (!j.is_object()) return unexpected(ParseError{path, "expected object"});
  auto user = j.find("username");
  auto hash = j.find("password_hash");
  auto created = j.find("created_at");
  if (user == j.end() || !user->is_string() || user->get<std::string>().empty()) {
    return unexpected(ParseError{path + "/username", "expected non-empty string"});
  }
  if (hash == j.end() || !hash->is_string() || hash->get<std::string>().empty()) {
    return unexpected(ParseError{path + "/password_hash", "expected non-empty string"});
  }
  if (created == j.end() || !created->is_number_integer()) {
    return unexpected(ParseError{path + "/created_at", "expected integer"});
  }
  return TeacherAccount{user->get<std::string>(), hash->get<std::string>(), created->get<UtcMillis>()};
}

}  // namespace

const TeacherAccount* Store::find_teacher(std::string_view username) const {
  auto it = std::find_if(teachers.begin(), teachers.end(),
                         [&](const TeacherAccount& t) { return t.username == username; });
  return it == teachers.end() ? nullptr : &*it;
}

std::string serialize_store(const Store& store) {
  Json doc;
  doc["format"] = kStoreFormat;
  doc["teachers"] = Json::array();
  for (const auto& t : store.teachers) {
    Json tj;
    tj["username"] = t.username;
    tj["password_hash"] = t.password_hash;
    tj["created_at"] = t.created_at;
    doc["teachers"].push_back(std::move(tj));
  }
  doc["bank"] = bank_to_json(store.bank);
  return doc.dump();
}

Expected<Store, BankError> parse_store(std::string_view document) {
  Json doc;
  try {
    doc = Json::parse(document);
  } catch (const Json::parse_error& e) {
    return unexpected(BankError{ParseError{"byte " + std::to_string(e.byte), e.what()}});
  }
  if (!doc.is_object()) return unexpected(BankError{ParseError{"", "expected object"}});
  auto format = doc.find("format");
  if (format == doc.end() || !format->is_number_integer() || format->get<int>() != kStoreFormat) {
    return unexpected(BankError{ParseError{"/format", "unsupported store format"}});
  }

  Store store;
  auto teachers = doc.find("teachers");
  if (teachers == doc.end() || !teachers->is_array()) {
    return unexpected(BankError{ParseError{"/teachers", "expected array"}});
  }
  std::unordered_set<std::string> names;
  for (std::size_t i = 0; i < teachers->size(); ++i) {
    const auto path = "/teachers/" + std::to_string(i);
    auto t = teacher_from_json((*teachers)[i], path);
    if (!t) return unexpected(BankError{t.error()});
    if (!names.insert(t->username).second) {
      return unexpected(BankError{ParseError{path + "/username", "duplicate username"}});
    }
    store.teachers.push_back(std::move(*t));
  }

  auto bank = doc.find("bank");
  if (bank == doc.end()) return unexpected(BankError{ParseError{"/bank", "missing field"}});
  auto parsed = bank_from_json(*bank, "/bank");
  if (!parsed) return unexpected(parsed.error());
  store.bank = std::move(*parsed);
  return store;
}

void atomic_write_file(const fs::path& path, std::string_view contents, fs::perms mode) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC,
                        static_cast<mode_t>(mode & fs::perms::mask));
  if (fd < 0) throw_io("cannot create", tmp);
  try {
    write_all(fd, contents, tmp);
    if (::fsync(fd) != 0) throw_io("fsync failed for", tmp);
  } catch (...) {
    ::close(fd);
    ::unlink(tmp.c_str());
    throw;
  }
  if (::close(fd) != 0) {
    ::unlink(tmp.c_str());
    throw_io("close failed for", tmp);
  }
  if (::rename(tmp.c_str(), path.c_str()) != 0) {
    ::unlink(tmp.c_str());
    throw_io("rename failed onto", path);
  }
  fsync_directory(path.parent_path());
}

void persist_store(const Store& store, const fs::path& path) {
  atomic_write_file(path, serialize_store(store));
}

Store load_store(const fs::path& path) {
  std::error_code ec;
  if (!fs::exists(path, ec)) {
    if (ec) throw StoreError(StoreError::Kind::Io, "cannot stat '" + path.string() + "': " + ec.message());
    return {};
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open", path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw_io("read failed for", path);

  auto parsed = parse_store(buf.str());
  if (!parsed) {
    throw StoreError(StoreError::Kind::Parse, "store '" + path.string() + "' " + describe(parsed.error()));
  }
  return std::move(*parsed);
}

}  // namespace edu
