#include <iostream>

#include "contfood/cli.hpp"

int main(int argc, char** argv) { return contfood::cli::run(argc, argv, std::cout, std::cerr); }
