#include "asmp/cli.hpp"

int main(int argc, char** argv) { return asmp::run_cli(argc, argv); }
