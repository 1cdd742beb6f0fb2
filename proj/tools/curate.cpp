#include "curate/cli.hpp"

int main(int argc, char** argv) { return curate::cli::run(argc, argv); }
