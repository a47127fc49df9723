#include "gaussgrid/cli.hpp"

int main(int argc, char** argv) { return gaussgrid::cli_main(argc, argv); }
