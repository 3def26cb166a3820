#include "phylo/cli.hpp"

int main(int argc, char** argv) { return phylo::run_command(argc, argv); }
