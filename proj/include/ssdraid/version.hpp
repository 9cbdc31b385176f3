#pragma once

namespace ssdraid {

inline constexpr const char* kVersion = "0.1.0";

}
