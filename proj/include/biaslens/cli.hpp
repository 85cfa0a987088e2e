#pragma once

#include <iosfwd>

namespace biaslens {

/// Exit codes: 0 ok, 1 usage, 2 data (including unreadable inputs), 3 internal.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace biaslens
