// Command-line harness over the library; see the README for the config file
// format and subcommand reference.

#include "sepdiff/cli.hpp"

int main(int argc, char** argv) { return sepdiff::cli::run(argc, argv); }
