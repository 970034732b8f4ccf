#pragma once

namespace ncl {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace ncl
