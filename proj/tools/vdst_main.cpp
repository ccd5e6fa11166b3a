#include <iostream>

#include "vdst/cli.hpp"

int main(int argc, char** argv) { return vdst::cli::run_cli(argc, argv, std::cout, std::cerr); }
