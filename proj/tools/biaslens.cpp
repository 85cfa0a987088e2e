#include <iostream>

#include "biaslens/cli.hpp"

int main(int argc, char** argv) { return biaslens::run_cli(argc, argv, std::cout, std::cerr); }
