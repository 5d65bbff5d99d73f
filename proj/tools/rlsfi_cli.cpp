#include <iostream>

#include "rlsfi/cli_commands.hpp"

int main(int argc, char** argv) { return rlsfi::cli::run(argc, argv, std::cout, std::cerr); }
