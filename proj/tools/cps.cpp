#include <iostream>
#include <string>
#include <vector>

#include "cps/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return cps::run_cli(args, std::cout, std::cerr);
}
