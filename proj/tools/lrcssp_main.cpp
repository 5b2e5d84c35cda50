#include <iostream>

#include "lrcssp/cli.hpp"

int main(int argc, char** argv) { return lrcssp::cli_main(argc, argv, std::cout, std::cerr); }
