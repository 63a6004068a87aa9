#include <iostream>
#include <string>
#include <vector>

#include "spi/cli.hpp"

int main(int argc, char** argv) {
  return spi::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
