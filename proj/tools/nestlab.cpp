#include <cstdlib>
#include <iostream>

#include "nestlab/cli.hpp"

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv + 1, argv + argc);
    return nestlab::cli::run(args, std::cout, std::cerr, std::getenv("NESTLAB_BITS"));
}
