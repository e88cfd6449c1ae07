#include "sigprune/cli.hpp"

int main(int argc, char** argv) { return sigprune::cli::run(argc, argv); }
