#include <iostream>

#include "calibloss/cli.hpp"

int main(int argc, char** argv) { return calibloss::run_cli(argc, argv, std::cout, std::cerr); }
