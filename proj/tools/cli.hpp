#pragma once

#include <string>
#include <vector>

namespace fprune {

// Runs one command line (without the program name). Returns the exit code;
// failures print "error: code=<name> message=\"...\"" on stderr.
int run_cli(const std::vector<std::string>& args);

}  // namespace fprune
