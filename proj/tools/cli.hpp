#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace deskmt::cli {

/// Runs one command line. Returns 0 on success, 1 on a usage error and 2 on a
/// runtime error; diagnostics go to `err`.
int dispatch(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace deskmt::cli
