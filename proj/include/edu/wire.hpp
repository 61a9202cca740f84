#pragma once

#include <string>
#include <string_view>
#include <variant>

#include "edu/expected.hpp"
#include "edu/session.hpp"

namespace edu::wire {

inline constexpr std::string_view kProtocolVersion = "1";

enum class ClientRole { floor, screen, observer };

std::string_view to_string(ClientRole role);
std::optional<ClientRole> role_from_string(std::string_view name);

namespace error_code {
inline constexpr std::string_view malformed_frame = "malformed_frame";
inline constexpr std::string_view protocol_violation = "protocol_violation";
inline constexpr std::string_view role_violation = "role_violation";
inline constexpr std::string_view segment_out_of_range = "segment_out_of_range";
}  // namespace error_code

// client -> hub
struct Hello {
  ClientRole role = ClientRole::floor;
  bool operator==(const Hello&) const = default;
};

struct Press {
  int segment = 0;
  bool operator==(const Press&) const = default;
};

// hub -> client
struct Welcome {
  ClientRole role = ClientRole::floor;
  std::string protocol_version{kProtocolVersion};
  bool operator==(const Welcome&) const = default;
};

struct Error {
  std::string code;
  std::string detail;
  bool operator==(const Error&) const = default;
};

using Question = QuestionPosted;
using Feedback = FeedbackIssued;
using Finished = SessionFinished;

using Message = std::variant<Hello, Press, Welcome, Question, Feedback, Finished, Error>;

/// Lowercase tag carried in the "type" field.
std::string_view type_name(const Message& message);

/// Compact JSON text frame with "type" first and fields in declaration order.
std::string encode(const Message& message);

struct DecodeError {
  std::string detail;
};

Expected<Message, DecodeError> decode(std::string_view frame);

Message from_event(const SessionEvent& event);

}  // namespace edu::wire
