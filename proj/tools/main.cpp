#include <iostream>
#include <string>
#include <vector>

#include "cmd/harness.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cmd::cli_main(args, std::cout, std::cerr);
}
