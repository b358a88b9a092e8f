#ifndef STAGECCD_VERSION_HPP
#define STAGECCD_VERSION_HPP

#include <array>
#include <utility>

namespace stageccd {

inline constexpr const char* kLibraryVersion = "0.1.0";

inline constexpr std::array<std::pair<const char*, const char*>, 6> kModuleVersions = {{
    {"structural-model", "0.1.0"},
    {"geometry-optimizer", "0.1.0"},
    {"placement-optimizer", "0.1.0"},
    {"plant-builder", "0.1.0"},
    {"controller-synthesis", "0.1.0"},
    {"codesign-cli", "0.1.0"},
}};

}  // namespace stageccd

#endif  // STAGECCD_VERSION_HPP
