#include "srnnpb/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return srnnpb::run_cli(argc, argv, std::cout, std::cerr); }
