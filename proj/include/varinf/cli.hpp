#pragma once

#include <iostream>

namespace varinf {

// Entry point of the `varinf` tool. Exit codes: 0 success, 1 usage or
// configuration error, 2 runtime failure.
int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout,
             std::ostream& err = std::cerr);

}  // namespace varinf
