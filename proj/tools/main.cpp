#include <vector>

#include "stopflow/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return stopflow::cli::run(args);
}
