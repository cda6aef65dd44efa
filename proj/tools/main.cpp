#include "vrnnaug/cli.hpp"

int main(int argc, char** argv) { return vrnnaug::run_cli(argc, argv); }
