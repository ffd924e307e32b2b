#include "riskshare/cli.hpp"

int main(int argc, char** argv) { return riskshare::cli::run_cli(argc, argv); }
