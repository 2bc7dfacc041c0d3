#include "h2sls/cli.hpp"

int main(int argc, char** argv) { return h2sls::cli_main(argc, argv); }
