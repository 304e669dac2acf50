#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>

namespace rsp::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,       // unexpected runtime failure
  kConfigError = 2,   // bad flags, missing or malformed inputs
  kCapability = 3,    // engine refused the query
  kSaturated = 4,     // every benchmark point overran
  kMismatch = 5,      // output differs from the reference evaluator
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Resolves a query argument: an existing path, or a canonical name such as
// "q1" / "q1.rspq" looked up in the bundled query directory.
std::string resolve_query_path(const std::string& arg);

// Entry point behind the rsplab binary. Diagnostics go to `err` as one JSON
// object per line.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rsp::cli
