#include "growthiv/cli/commands.hpp"

#include <iostream>

int main(int argc, char** argv) { return growthiv::cli::run(argc, argv, std::cout, std::cerr); }
