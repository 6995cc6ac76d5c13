#pragma once

#include <iosfwd>

namespace pct {

// Exit codes: 0 success, 1 simulation failure or nonempty diff, 2 usage/parse/load error.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pct
