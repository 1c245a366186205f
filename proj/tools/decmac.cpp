#include "decmac/cli.hpp"

int main(int argc, char** argv) { return decmac::run_cli(argc, argv); }
