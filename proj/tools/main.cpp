#include <string>
#include <vector>

#include "dplab/harness.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return dplab::run_cli(args);
}
