#include <iostream>

#include "stylebc/cli.hpp"

int main(int argc, char** argv) { return stylebc::run_cli(argc, argv, std::cout, std::cerr); }
