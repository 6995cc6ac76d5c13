#include <iostream>

#include "pct/cli.hpp"

int main(int argc, char** argv) { return pct::cli_main(argc, argv, std::cout, std::cerr); }
