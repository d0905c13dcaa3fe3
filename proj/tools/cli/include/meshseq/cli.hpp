#pragma once

#include <string>
#include <vector>

namespace meshseq::cli {

// Runs one command line (program name first) and returns the exit code:
// 0 when the requested artifact was fully produced, 1 on a runtime error,
// 2 or above for usage errors.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace meshseq::cli
