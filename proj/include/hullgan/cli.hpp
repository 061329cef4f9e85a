#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hullgan {

/// Exit codes: 0 success, 1 usage error, 2 runtime error.
int cli_main(int argc, char** argv);

/// Same, with explicit arguments (without the program name) and streams.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace hullgan
