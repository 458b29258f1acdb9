#include <iostream>

#include "wmprobe/commands.hpp"

int main(int argc, char** argv) { return wmprobe::run_cli(argc, argv, std::cout, std::cerr); }
