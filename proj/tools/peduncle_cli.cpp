#include "peduncle/cli.hpp"

int main(int argc, char** argv) { return peduncle::cli::run(argc, argv); }
