#include "meshseq/cli.hpp"

int main(int argc, char** argv) { return meshseq::cli::run(argc, argv); }
