#include <iostream>
#include <string>
#include <vector>

#include "ionwave/cli_runner.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return ionwave::cli::run(args, std::cout, std::cerr);
}
