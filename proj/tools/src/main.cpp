#include <iostream>

#include "mctm_tools/commands.hpp"

int main(int argc, char** argv) { return mctm::tools::run_cli(argc, argv, std::cout, std::cerr); }
