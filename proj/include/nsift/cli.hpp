#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace nsift {

enum ExitCode { kExitOk = 0, kExitHypothesisFailure = 1, kExitUsage = 2, kExitNumeric = 3 };

struct RunConfig {
  std::string subcommand;
  std::string problem;
  std::string out_dir = "nsift-out";
  std::uint64_t seed = 0;
  int threads = 0;  // 0: hardware parallelism
  std::map<std::string, std::string> overrides;  // --set key=value
  int verbosity = 0;
};

/// Command-line entry point; output goes to out, diagnostics to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace nsift
