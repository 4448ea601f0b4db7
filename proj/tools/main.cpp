#include "delsyn/cli.hpp"

int main(int argc, char** argv) { return delsyn::cli_main(argc, argv); }
