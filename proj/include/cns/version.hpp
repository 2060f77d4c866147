#pragma once

namespace cns {

inline constexpr const char* kLibraryVersion = "0.1.0";

}  // namespace cns
