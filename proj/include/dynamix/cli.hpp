#pragma once

#include <string>
#include <vector>

namespace dynamix::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;      // bad input, config, or file format
inline constexpr int kExitDivergence = 3; // training went non-finite
inline constexpr int kExitRuntime = 4;    // embedding or runtime failure
inline constexpr const char* kToolVersion = "0.1.0";

/// Entry point shared by the binary and the tests. args excludes argv[0].
int run(const std::vector<std::string>& args);

/// Relative paths resolve under DYNAMIX_DATA_DIR when it is set.
std::string resolve_path(const std::string& path);

} // namespace dynamix::cli
