#include "perflow/cli.hpp"

int main(int argc, char** argv) { return perflow::cli::run(argc, argv); }
