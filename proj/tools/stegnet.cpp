#include <iostream>

#include "stegnet/cli.hpp"

int main(int argc, char** argv) {
  return stegnet::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
