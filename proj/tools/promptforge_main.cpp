#include "promptforge/cli.hpp"

int main(int argc, char** argv) {
    return promptforge::cli::run(argc, argv);
}
