#pragma once

#include <stdexcept>
#include <utility>
#include <variant>

namespace edu {

template <typename E>
struct Unexpected {
  E error;
};

template <typename E>
Unexpected(E) -> Unexpected<E>;

template <typename E>
Unexpected<std::decay_t<E>> unexpected(E&& e) {
  return {std::forward<E>(e)};
}

// Minimal stand-in for std::expected until the toolchain ships C++23.
template <typename T, typename E>
class Expected {
 public:
  Expected(T value) : storage_(std::in_place_index<0>, std::move(value)) {}
  Expected(Unexpected<E> err) : storage_(std::in_place_index<1>, std::move(err.error)) {}

  [[nodiscard]] bool has_value() const noexcept { return storage_.index() == 0; }
  explicit operator bool() const noexcept { return has_value(); }

  T& value() & {
    if (!has_value()) throw std::logic_error("Expected::value() on error");
    return std::get<0>(storage_);
  }
  const T& value() const& {
    if (!has_value()) throw std::logic_error("Expected::value() on error");
    return std::get<0>(storage_);
  }
  T&& value() && {
    if (!has_value()) throw std::logic_error("Expected::value() on error");
    return std::get<0>(std::move(storage_));
  }

  E& error() & { return std::get<1>(storage_); }
  const E& error() const& { return std::get<1>(storage_); }

  T* operator->() { return &value(); }
  const T* operator->() const { return &value(); }
  T& operator*() & { return value(); }
  const T& operator*() const& { return value(); }

 private:
  std::variant<T, E> storage_;
};

}  // namespace edu
