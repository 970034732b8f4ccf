#include <vector>

#include "ncl/cli/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ncl::cli::run_cli(args);
}
