#include <iostream>

#include "fiberopt/commands.hpp"

int main(int argc, char** argv) { return fiberopt::run_cli(argc, argv, std::cout, std::cerr); }
