#ifndef DMIA_TOOLS_CLI_H_
#define DMIA_TOOLS_CLI_H_

#include <string>
#include <vector>

namespace dmia::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

// args[0] is the program name.
int cli_main(const std::vector<std::string>& args);

}  // namespace dmia::cli

#endif  // DMIA_TOOLS_CLI_H_
