#include <iostream>

#include "convreg/cli.hpp"

int main(int argc, char** argv) { return convreg::cli::main(argc, argv, std::cout, std::cerr); }
