#include "flowguard/cli.hpp"

int main(int argc, char** argv) { return flowguard::cli_main(argc, argv); }
