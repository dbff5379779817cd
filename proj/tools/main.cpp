#include "nsum/cli.hpp"

int main(int argc, char** argv) { return nsum::run_cli(argc, argv); }
