#include "edu/wire.hpp"

#include <limits>

namespace edu::wire {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Json to_json(const Message& message) {
  Json j;
  j["type"] = std::string(type_name(message));
  std::visit(overloaded{
                 [&](const Hello& m) { j["role"] = std::string(to_string(m.role)); },
                 [&](const Press& m) { j["segment"] = m.segment; },
                 [&](const Welcome& m) {
                   j["role"] = std::string(to_string(m.role));
                   j["protocol_version"] = m.protocol_version;
                 },
                 [&](const Question& m) {
                   j["index"] = m.index;
                   j["total"] = m.total;
                   j["text"] = m.text;
                   j["answers"] = Json::array();
                   for (const auto& a : m.answers) {
                     Json aj;
                     aj["label"] = a.label;
                     aj["color"] = std::string(edu::to_string(a.color));
                     j["answers"].push_back(std::move(aj));
                   }
                 },
                 [&](const Feedback& m) {
                   j["correct"] = m.correct;
                   j["segment"] = m.segment;
                   j["message"] = m.message;
                 },
                 [&](const Finished& m) {
                   j["correct_count"] = m.correct_count;
                   j["total"] = m.total;
                 },
                 [&](const Error& m) {
                   j["code"] = m.code;
                   j["detail"] = m.detail;
                 },
             },
             message);
  return j;
}

// Field readers throw DecodeError; decode() converts them to the error branch.
const Json& field(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw DecodeError{std::string("missing field '") + key + "'"};
  return *it;
}

std::string get_string(const Json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_string()) throw DecodeError{std::string("field '") + key + "' must be a string"};
  return v.get<std::string>();
}

int get_int(const Json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_number_integer()) throw DecodeError{std::string("field '") + key + "' must be an integer"};
  const auto wide = v.get<std::int64_t>();
  if (wide < std::numeric_limits<int>::min() || wide > std::numeric_limits<int>::max()) {
    throw DecodeError{std::string("field '") + key + "' out of range"};
  }
  return static_cast<int>(wide);
}

bool get_bool(const Json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_boolean()) throw DecodeError{std::string("field '") + key + "' must be a boolean"};
  return v.get<bool>();
}

ClientRole get_role(const Json& j) {
  auto name = get_string(j, "role");
  auto role = role_from_string(name);
  if (!role) throw DecodeError{"unknown role '" + name + "'"};
  return *role;
}

}  // namespace

std::string_view to_string(ClientRole role) {
  switch (role) {
    case ClientRole::floor: return "floor";
    case ClientRole::screen: return "screen";
    case ClientRole::observer: return "observer";
  }
  return "unknown";
}

std::optional<ClientRole> role_from_string(std::string_view name) {
  if (name == "floor") return ClientRole::floor;
  if (name == "screen") return ClientRole::screen;
  if (name == "observer") return ClientRole::observer;
  return std::nullopt;
}

std::string_view type_name(const Message& message) {
  return std::visit(overloaded{
                        [](const Hello&) { return std::string_view("hello"); },
                        [](const Press&) { return std::string_view("press"); },
                        [](const Welcome&) { return std::string_view("welcome"); },
                        [](const Question&) { return std::string_view("question"); },
                        [](const Feedback&) { return std::string_view("feedback"); },
                        [](const Finished&) { return std::string_view("finished"); },
                        [](const Error&) { return std::string_view("error"); },
                    },
                    message);
}

std::string encode(const Message& message) { return to_json(message).dump(); }

Expected<Message, DecodeError> decode(std::string_view frame) {
  Json j;
  try {
    j = Json::parse(frame);
  } catch (const Json::parse_error&) {
    return unexpected(DecodeError{"frame is not valid JSON"});
  }
  if (!j.is_object()) return unexpected(DecodeError{"frame must be a JSON object"});

  try {
    const auto type = get_string(j, "type");
    if (type == "hello") return Message{Hello{get_role(j)}};
    if (type == "press") return Message{Press{get_int(j, "segment")}};
    if (type == "welcome") return Message{Welcome{get_role(j), get_string(j, "protocol_version")}};
    if (type == "feedback") {
      return Message{Feedback{get_bool(j, "correct"), get_int(j, "segment"), get_string(j, "message")}};
    }
    if (type == "finished") return Message{Finished{get_int(j, "correct_count"), get_int(j, "total")}};
    if (type == "error") return Message{Error{get_string(j, "code"), get_string(j, "detail")}};
    if (type == "question") {
      Question q;
      q.index = get_int(j, "index");
      q.total = get_int(j, "total");
      q.text = get_string(j, "text");
      const auto& answers = field(j, "answers");
      if (!answers.is_array()) throw DecodeError{"field 'answers' must be an array"};
      for (const auto& a : answers) {
        if (!a.is_object()) throw DecodeError{"answer entries must be objects"};
        auto color_name = get_string(a, "color");
        auto color = segment_color_from_string(color_name);
        if (!color) throw DecodeError{"unknown color '" + color_name + "'"};
        q.answers.push_back({get_string(a, "label"), *color});
      }
      return Message{std::move(q)};
    }
    return unexpected(DecodeError{"unknown message type '" + type + "'"});
  } catch (const DecodeError& e) {
    return unexpected(e);
  }
}

Message from_event(const SessionEvent& event) {
  return std::visit([](const auto& e) -> Message { return e; }, event);
}

}  // namespace edu::wire
