#include "hwnn/cli.hpp"

int main(int argc, char **argv) { return hwnn::run_cli(argc, argv); }
