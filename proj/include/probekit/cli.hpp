#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace probekit {

/// Runs one `probekit` invocation. `args` excludes the program name.
/// Returns 0 iff every requested artifact was written.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace probekit
