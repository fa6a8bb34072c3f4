#pragma once

namespace treefuse {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace treefuse
