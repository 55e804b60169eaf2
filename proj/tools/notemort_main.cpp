#include <iostream>

#include "notemort/cli.hpp"

int main(int argc, char** argv) { return notemort::run_cli(argc, argv, std::cout, std::cerr); }
