#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "mctm_tools/run_config.hpp"

namespace mctm::tools {

/// Parsed command line. Flags override the matching config keys.
struct CommandLine {
  std::string command;  // fit | predict | bootstrap | compare-approx | permute-check | simulate
  std::filesystem::path input;
  std::filesystem::path config;
  std::filesystem::path out_dir = ".";
  std::filesystem::path model;  // result document of an earlier fit
  std::optional<std::string> likelihood;
  std::optional<std::string> lambda;
  std::optional<std::uint64_t> seed;
  std::optional<int> replicates;
  std::optional<int> samples;
  std::optional<int> years;
  std::optional<double> missing_rate;
};

/// Config file (if any) with command-line overrides applied and validated.
RunConfig resolve_config(const CommandLine& cl);

/// Runs one subcommand; returns the exit status. Diagnostics go to err.
int run_command(const CommandLine& cl, std::ostream& out, std::ostream& err);

/// argv front end (CLI11). Exit status 0 on success, 1 on bad input or a
/// failed run, 2 on usage errors.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mctm::tools
