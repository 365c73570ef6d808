#include <string>
#include <vector>

#include "cli.h"

int main(int argc, char** argv) {
  return dmia::cli::cli_main(std::vector<std::string>(argv, argv + argc));
}
