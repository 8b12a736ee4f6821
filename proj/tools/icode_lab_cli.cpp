#include "icode_lab/cli.hpp"

int main(int argc, char** argv) { return icode_lab::run_cli(argc, argv); }
