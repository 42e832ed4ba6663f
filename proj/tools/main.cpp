#include "varinf/cli.hpp"

int main(int argc, char** argv) { return varinf::cli_main(argc, argv); }
