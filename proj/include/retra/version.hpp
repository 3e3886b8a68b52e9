#pragma once

namespace retra {

inline constexpr const char* version_string = "0.1.0";

}
