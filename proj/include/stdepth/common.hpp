#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace stdepth {

// Extents in (batch, channel, height, width) order for 4-D tensors.
using Shape = std::vector<int64_t>;

inline int64_t numel_of(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream oss;
    oss << '[';
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) oss << 'x';
        oss << s[i];
    }
    oss << ']';
    return oss.str();
}

}  // namespace stdepth

// Precondition check with a streamed message. Throws std::invalid_argument.
#define SD_REQUIRE(cond, msg)                        \
    do {                                             \
        if (!(cond)) {                               \
            std::ostringstream sd_oss_;              \
            sd_oss_ << msg;                          \
            throw std::invalid_argument(sd_oss_.str()); \
        }                                            \
    } while (0)

// Runtime failure (IO, corrupt files). Throws std::runtime_error.
#define SD_FAIL_IF(cond, msg)                        \
    do {                                             \
        if (cond) {                                  \
            std::ostringstream sd_oss_;              \
            sd_oss_ << msg;                          \
            throw std::runtime_error(sd_oss_.str()); \
        }                                            \
    } while (0)
