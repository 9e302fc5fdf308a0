#include <iostream>

#include "decab/cli.hpp"

int main(int argc, char** argv) { return decab::run_cli(argc, argv, std::cout, std::cerr); }
