#include <iostream>
#include <string>
#include <vector>

#include "counterclr/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return counterclr::run_cli(args, std::cout, std::cerr);
}
