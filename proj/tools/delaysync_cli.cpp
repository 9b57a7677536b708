// Command-line front end: run or verify a scenario file.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "delaysync/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Synchronization protocol synthesis and delayed-network simulation"};
  app.require_subcommand(1);

  unsigned long long seed = 0;
  bool quiet = false;
  app.add_option("--seed", seed, "Reserved; the pipeline is deterministic");
  app.add_flag("-q,--quiet", quiet, "Only print errors and the verdict");

  std::string run_file, out_dir;
  CLI::App* run = app.add_subcommand("run", "Design, simulate and analyze a scenario");
  run->add_option("file", run_file, "Scenario file")->required();
  run->add_option("--out", out_dir, "Artifact directory (default $DELAYSYNC_OUT/<name>)");

  std::string verify_file;
  CLI::App* verify = app.add_subcommand("verify", "Synthesize and print certificates only");
  verify->add_option("file", verify_file, "Scenario file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : delaysync::kExitInputError;
  }

  delaysync::RunOptions options;
  options.out_dir = out_dir;
  options.quiet = quiet;
  if (run->parsed()) return delaysync::run_scenario(run_file, options, std::cout, std::cerr);
  return delaysync::verify_design(verify_file, options, std::cout, std::cerr);
}
