#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) { return semi2i::cli::run(argc, argv, std::cout, std::cerr); }
