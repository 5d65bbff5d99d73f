#pragma once

// Command-line front end. `run` parses argv, dispatches to a subcommand and
// maps library errors onto exit codes; it never lets an exception escape.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "json.hpp"
#include "rlsfi/solver.hpp"

namespace rlsfi::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kFormatError = 3, kNumericalError = 4 };

// Resolved settings: JSON config file first, then command-line overrides.
struct RunConfig {
  std::string geometry = "builtin:head12";  // "builtin:head12", *.json or *.csv
  std::size_t frontmost_index = 0;          // used for CSV geometry only
  bool free_field = false;
  std::optional<std::string> hrtf;          // dataset manifest; exclusive with free_field
  double sound_speed = kDefaultSoundSpeed;
  DesignConfig design;
  std::string mode = "2d";  // desired response: "1d" (look-elevation ring) or "2d"
  double az_step = 5.0;
  double el_step = 5.0;
  std::string normalization = "global";
  std::filesystem::path out = "out";
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  // Unknown keys are rejected so typos do not pass silently.
  static RunConfig from_json(const nlohmann::json& j);
};

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rlsfi::cli
