#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>

namespace cns {

/// Shortest decimal string that round-trips to the exact double; keeps CSV
/// outputs byte-stable across runs.
inline std::string format_double(double v) {
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    return buf;
}

}  // namespace cns
