#include "stsc/cli.hpp"

int main(int argc, char** argv) { return stsc::run_cli(argc, argv); }
