#include <iostream>

#include "hybrid_orbit/cli.hpp"

int main(int argc, char** argv) {
    return hybrid_orbit::run_cli(argc, argv, std::cout, std::cerr);
}
