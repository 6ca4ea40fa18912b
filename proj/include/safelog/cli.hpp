#pragma once

#include <iosfwd>

namespace safelog {

/// Entry point of the `safelog` tool. Returns 0 on success, 2 on a usage
/// error and 1 when the run itself fails.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace safelog
