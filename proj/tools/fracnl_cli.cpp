#include <iostream>

#include "fracnl/cli.hpp"

int main(int argc, char** argv) { return fracnl::cli_main(argc, argv, std::cout, std::cerr); }
