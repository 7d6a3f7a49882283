#pragma once

namespace nlsr {

inline constexpr const char* version = "0.1.0";

} // namespace nlsr
