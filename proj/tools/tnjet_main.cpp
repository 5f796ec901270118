#include "tnjet/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return tnjet::run_cli(args, std::cout, std::cerr);
}
