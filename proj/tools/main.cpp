#include <iostream>

#include "deocc/cli.hpp"

int main(int argc, char** argv) {
    return deocc::run_cli(argc, argv, std::cout, std::cerr);
}
