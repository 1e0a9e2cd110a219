#include <iostream>

#include "gridvad/cli.hpp"

int main(int argc, char** argv) { return gridvad::cli::run(argc, argv, std::cout, std::cerr); }
