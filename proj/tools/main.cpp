#include <iostream>
#include <string>
#include <vector>

#include "mmpc/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return mmpc::dispatch(args, std::cout, std::cerr);
}
