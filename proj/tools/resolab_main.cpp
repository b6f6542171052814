#include <iostream>
#include <string>
#include <vector>

#include "resolab/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return resolab::cli::run(args, std::cout, std::cerr);
}
