#include <iostream>

#include "flowchain/run.hpp"

int main(int argc, char** argv) { return flowchain::cli::main_entry(argc, argv, std::cout, std::cerr); }
