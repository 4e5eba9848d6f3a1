#include "grami/cli.hpp"

int main(int argc, char** argv) { return grami::run_cli(argc, argv); }
