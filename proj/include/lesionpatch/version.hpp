#pragma once

namespace lesionpatch {
inline constexpr const char* kToolVersion = "1.0.0";
}
