#pragma once

#include <array>
#include <charconv>
#include <string>

namespace dpsr {

/// Shortest text that parses back to exactly `value`.
inline std::string format_real(double value) {
    std::array<char, 32> buf{};
    const auto result = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), result.ptr);
}

}  // namespace dpsr
