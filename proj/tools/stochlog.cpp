#include "stochlog/cli.hpp"

#include <iostream>

int main(int argc, char **argv) { return stochlog::run_cli(argc, argv, std::cout, std::cerr); }
