#include <iostream>

#include "groundwork/cli.hpp"

int main(int argc, char** argv) {
    return groundwork::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
