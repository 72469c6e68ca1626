#include <iostream>

#include "kwmhn/cli.hpp"

int main(int argc, char** argv) { return kwmhn::cli::run(argc, argv, std::cout, std::cerr); }
