#pragma once

namespace blockcam {
inline constexpr const char* kVersion = "0.1.0";
}
