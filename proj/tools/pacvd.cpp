#include <iostream>

#include "pacvd/cli.hpp"

int main(int argc, char** argv) { return pacvd::run_cli(argc, argv, std::cout, std::cerr); }
