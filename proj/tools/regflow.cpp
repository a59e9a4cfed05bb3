#include <string>
#include <vector>

#include "cli_commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return regflow::cli::run_cli(args);
}
