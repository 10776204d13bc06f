#include <iostream>

#include "sdrlab/commands.hpp"

int main(int argc, char** argv) {
    return sdrlab::cli::run(argc, argv, std::cout, std::cerr);
}
