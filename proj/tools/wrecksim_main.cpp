#include <iostream>

#include "wrecksim/cli.hpp"

int main(int argc, char** argv) {
  return wrecksim::run_cli({argv, argv + argc}, std::cout, std::cerr);
}
