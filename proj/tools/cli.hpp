#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace rotquant::cli {

// Runs one command line (without the program name) and returns the exit code:
// 0 success, 2 argument error, 3 data/shape/IO error, 4 unconstructible
// order, 5 integrity error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rotquant::cli
