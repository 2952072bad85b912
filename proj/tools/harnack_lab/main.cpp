#include "commands.hpp"

int main(int argc, char** argv) {
    return harnack::cli::run_command(std::vector<std::string>(argv + 1, argv + argc));
}
