#pragma once

#define KREIN_VERSION_MAJOR 0
#define KREIN_VERSION_MINOR 1
#define KREIN_VERSION_PATCH 0

namespace krein {
inline constexpr const char* version = "0.1.0";
}
