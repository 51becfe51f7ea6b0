#include "fpsrm/cli.hpp"

int main(int argc, char** argv) { return fpsrm::cli::cli_main(argc, argv); }
