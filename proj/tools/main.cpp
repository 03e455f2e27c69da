#include <iostream>

#include "selfen/cli.hpp"

int main(int argc, char** argv) { return selfen::run_cli(argc, argv, std::cout, std::cerr); }
