#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fewgan {

// Entry point behind the `fewgan` executable. args excludes the program name.
// Returns 0 on success, 1 on a runtime failure (one-line diagnostic on err) and 2 on a
// usage error (message plus usage text on err).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fewgan
