#include <iostream>

#include "sqz/cli/app.hpp"

int main(int argc, char** argv) { return sqz::cli::run(argc, argv, std::cout, std::cerr); }
