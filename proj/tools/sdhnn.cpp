#include "sdhnn/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return sdhnn::cli::run(argc, argv, std::cout, std::cerr); }
