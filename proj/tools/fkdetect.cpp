#include <iostream>

#include "fkd/commands.hpp"

int main(int argc, char** argv) { return fkd::cli_main(argc, argv, std::cout, std::cerr); }
