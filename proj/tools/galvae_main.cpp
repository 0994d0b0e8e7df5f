#include <iostream>

#include "galvae/cli.hpp"

int main(int argc, char** argv) { return galvae::parse_and_dispatch(argc, argv, std::cout, std::cerr); }
