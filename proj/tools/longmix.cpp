#include "longmix/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return longmix::cli::run(args, std::cerr);
}
