#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "delaysync/analysis.hpp"
#include "delaysync/scenario.hpp"

namespace delaysync {

/// Process exit codes of the command-line front end.
enum ExitCode : int {
  kExitPass = 0,
  kExitVerdictFail = 1,
  kExitDesignError = 2,
  kExitInputError = 3,
};

struct RunOptions {
  /// Exact artifact directory; when empty, <root>/<scenario stem> is used
  /// with root = $DELAYSYNC_OUT or "delaysync_out".
  std::filesystem::path out_dir;
  bool quiet = false;
};

/// Resolves the artifact directory for `scenario_path` as described above.
std::filesystem::path resolve_output_dir(const std::filesystem::path& scenario_path,
                                         const RunOptions& options);

/// Designs, simulates and analyzes one scenario, writing every artifact into
/// the output directory. Returns the exit code; diagnostics go to `err`,
/// progress lines to `out` unless quiet.
int run_scenario(const std::filesystem::path& scenario_path, const RunOptions& options,
                 std::ostream& out, std::ostream& err);

/// Synthesis and certificates only; prints a key/value report to `out`.
int verify_design(const std::filesystem::path& scenario_path, const RunOptions& options,
                  std::ostream& out, std::ostream& err);

/// Key/value dump of every synthesized quantity plus certificates.
std::string design_report(const Scenario& scenario);

}  // namespace delaysync
