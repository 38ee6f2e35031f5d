#ifndef NBPS_VERSION_HPP
#define NBPS_VERSION_HPP

namespace nbps {

inline constexpr const char* tool_version = "0.1.0";
inline constexpr int trace_format_version = 1;

}

#endif
