#include <iostream>

#include "permgec/commands.hpp"

int main(int argc, char** argv) { return permgec::run_cli(argc, argv, std::cout, std::cerr); }
