#pragma once

namespace episwitch {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace episwitch
