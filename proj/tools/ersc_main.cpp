#include "ersc/cli.hpp"

int main(int argc, char** argv) { return ersc::run_cli(argc, argv); }
