#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace har {

/// Error thrown for contract violations (shape mismatches, bad configs,
/// malformed inputs). The message names the offending value or dimension.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {

inline void str_append(std::ostringstream&) {}

template <typename T, typename... Rest>
void str_append(std::ostringstream& oss, T&& v, Rest&&... rest) {
    oss << std::forward<T>(v);
    str_append(oss, std::forward<Rest>(rest)...);
}

}  // namespace detail

template <typename... Args>
std::string str(Args&&... args) {
    std::ostringstream oss;
    detail::str_append(oss, std::forward<Args>(args)...);
    return oss.str();
}

template <typename... Args>
[[noreturn]] void fail(Args&&... args) {
    throw Error(str(std::forward<Args>(args)...));
}

template <typename... Args>
void require(bool cond, Args&&... args) {
    if (!cond) fail(std::forward<Args>(args)...);
}

}  // namespace har
