#include <iostream>

#include "bgw/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return bgw::cli::run(args, std::cout, std::cerr);
}
