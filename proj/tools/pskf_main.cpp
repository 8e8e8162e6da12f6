#include <iostream>

#include "pskf/cli.hpp"

int main(int argc, char** argv) { return pskf::cli::run(argc, argv, std::cout, std::cerr); }
