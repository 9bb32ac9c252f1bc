#include "fastgan/cli/commands.hpp"

int main(int argc, char** argv) { return fastgan::cli::run(argc, argv); }
