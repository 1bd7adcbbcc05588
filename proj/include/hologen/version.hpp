#ifndef HOLOGEN_VERSION_HPP
#define HOLOGEN_VERSION_HPP

namespace hologen {
inline constexpr const char* kVersion = "0.1.0";
}

#endif
