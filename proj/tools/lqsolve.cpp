#include "lq/cli.hpp"

int main(int argc, char** argv) { return lq::run_cli(argc, argv); }
