#include "votseg/cli.hpp"

int main(int argc, char** argv) { return votseg::cli::run(argc, argv); }
