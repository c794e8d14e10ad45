#include "sacp/cli.hpp"

int main(int argc, char** argv) { return sacp::cli::run_cli(argc, argv); }
