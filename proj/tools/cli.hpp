#pragma once

#include <string>
#include <vector>

namespace tracerag::cli {

// Full command dispatch (index / analyze / report / eval / run). Exposed as
// a function so tests can drive the CLI in-process; main() is a thin shim.
int run_cli(const std::vector<std::string>& args);

} // namespace tracerag::cli
