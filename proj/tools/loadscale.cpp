#include "loadscale/cli.hpp"

int main(int argc, char** argv) { return loadscale::cli::dispatch(argc, argv); }
