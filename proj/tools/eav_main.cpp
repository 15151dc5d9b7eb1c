#include <string>
#include <vector>

#include "eav/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return eav::cli::main(args);
}
