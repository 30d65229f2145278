#include "s2s/cli.hpp"

int main(int argc, char** argv) { return s2s::cli::ctl_main(argc, argv); }
