#include <iostream>

#include "adsrank/cli.hpp"

int main(int argc, char** argv) {
  return adsrank::cli::run(argc, argv, std::cout, std::cerr);
}
