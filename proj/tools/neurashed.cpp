#include <string>
#include <vector>

#include "neurashed/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return neurashed::cli::dispatch(args);
}
