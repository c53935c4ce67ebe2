#include "qvfgm/cli.hpp"

int main(int argc, char** argv) { return qvfgm::cli::run(argc, argv); }
