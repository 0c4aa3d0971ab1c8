#include <iostream>

#include "isoforge/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return isoforge::run_cli(args, std::cout, std::cerr);
}
