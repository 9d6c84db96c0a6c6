#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rmg::cli {

// args excludes the program name. Exit codes: 0 success, 1 usage, 2 data
// error, 3 numeric failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rmg::cli
