#include "bbmld/cli.hpp"

int main(int argc, char** argv) { return bbmld::run_cli(argc, argv); }
