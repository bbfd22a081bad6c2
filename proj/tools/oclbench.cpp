#include "oclb/cli.hpp"

int main(int argc, char** argv) {
    return oclb::run_cli(argc, argv);
}
