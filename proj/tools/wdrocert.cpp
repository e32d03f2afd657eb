#include "wdro/cli.hpp"

int main(int argc, char** argv) { return wdro::cli::dispatch(argc, argv); }
