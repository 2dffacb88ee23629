#pragma once

namespace msc {

inline constexpr const char* kVersion = "0.1.0";

} // namespace msc
