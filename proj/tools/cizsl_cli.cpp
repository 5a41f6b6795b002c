#include <iostream>

#include "cizsl/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cizsl::run_cli(args, std::cout, std::cerr);
}
