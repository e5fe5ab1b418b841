#pragma once

// Experiment runner behind the command-line tool: configuration handling,
// execution of the four modes and the output files.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "normflow/dynamics.hpp"

namespace normflow::runner {

using Json = nlohmann::ordered_json;

enum class Mode { flow, gd, one_neuron, verify };

Mode parse_mode(const std::string& name);
std::string to_string(Mode mode);

/// Command-line values that take precedence over the configuration file.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output_dir;
    std::optional<double> t_end;
    std::optional<double> step;
    std::optional<std::string> integrator;
    bool no_reproject = false;
    std::optional<std::string> gamma;
};

/// Every configuration key with its default value.
Json default_config();

/// Defaults, then the file contents (merge patch), then the mode and the
/// overrides. Validates the result and throws std::invalid_argument on bad input.
Json resolve_config(const Json& file_config, Mode mode, const Overrides& overrides);

/// Reads a JSON configuration file; throws std::runtime_error when unreadable.
Json load_config(const std::filesystem::path& path);

/// Round-trip decimal form with 17 significant digits.
std::string format_double(double x);

/// Header plus one row per record. With one_neuron set the regime label and the
/// monitored quantities are appended.
void write_trajectory_csv(std::ostream& out, const TrajectoryRecord& tr, bool one_neuron);

struct RunOutcome {
    bool ok = true;
    Json summary;
};

/// Executes the resolved configuration and writes all files below its output_dir.
RunOutcome run(const Json& config, std::ostream& log);

}  // namespace normflow::runner
