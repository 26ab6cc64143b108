#include <iostream>

#include "rentyield/cli.hpp"

int main(int argc, char** argv) { return rentyield::cli::run(argc, argv, std::cout, std::cerr); }
