#include <iostream>

#include "phonodiverge/cli.hpp"

int main(int argc, char** argv) {
  return phonodiverge::cli_dispatch(argc, argv, std::cout, std::cerr);
}
