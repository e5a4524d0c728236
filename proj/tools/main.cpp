#include "gpnd/cli.hpp"

int main(int argc, char** argv) { return gpnd::cli::run(argc, argv); }
