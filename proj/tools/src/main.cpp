#include <iostream>

#include "nnlsgd_cli/cli.hpp"

int main(int argc, char** argv) {
  return nnlsgd::cli::dispatch(argc, argv, std::cout, std::cerr);
}
