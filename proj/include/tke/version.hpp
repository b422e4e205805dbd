#pragma once

namespace tke {

inline constexpr const char* tool_version = "1.0.0";
inline constexpr int model_format_version = 1;

}
