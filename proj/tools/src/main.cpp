#include "fvp/tools/cli.hpp"

int main(int argc, char** argv) { return fvp::tools::run(argc, argv); }
