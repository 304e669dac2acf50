#include <iostream>

#include "rsplab/cli.hpp"

int main(int argc, char** argv) { return rsp::cli::run(argc, argv, std::cout, std::cerr); }
