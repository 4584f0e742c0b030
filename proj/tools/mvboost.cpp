#include "mvboost/cli.hpp"

int main(int argc, char** argv) { return mvboost::cli::run(argc, argv); }
