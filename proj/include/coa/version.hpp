#pragma once

namespace coa {

inline constexpr const char* kToolkitVersion = "0.1.0";

}  // namespace coa
