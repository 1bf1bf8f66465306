#pragma once

namespace odx {

inline constexpr const char* kToolName = "odx";
inline constexpr const char* kVersion = "0.1.0";

}  // namespace odx
