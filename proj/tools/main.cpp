#include "nppc/cli.hpp"

int main(int argc, char** argv) { return nppc::run_cli(argc, argv); }
