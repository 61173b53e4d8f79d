#include "gismo/cli.hpp"

int main(int argc, char** argv) { return gismo::cli::run(argc, argv); }
