#include <iostream>

#include "safelog/cli.hpp"

int main(int argc, char** argv) { return safelog::cli_main(argc, argv, std::cout, std::cerr); }
