#include "graphnf/cli.hpp"

int main(int argc, char** argv) { return graphnf::cli::run(argc, argv); }
