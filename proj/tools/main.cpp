#include <iostream>

#include "ledvlc/cli.hpp"

int main(int argc, char** argv) { return ledvlc::cli::run(argc, argv, std::cout, std::cerr); }
