#include "pmuplace/cli.hpp"

int main(int argc, char** argv) { return pmu::cli_main(argc, argv); }
