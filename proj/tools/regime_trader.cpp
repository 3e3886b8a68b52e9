#include "retra/cli.hpp"

int main(int argc, char** argv) { return retra::run_command(argc, argv); }
