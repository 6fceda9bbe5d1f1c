#include <iostream>

#include "cornerforge/cli.hpp"
#include "cornerforge/log.hpp"

int main(int argc, char** argv) {
  cornerforge::log::init_from_env();
  return cornerforge::cli::run(argc, argv, std::cout, std::cerr);
}
