#pragma once

// Reproducible experiment runner behind the command-line tool. A run takes a
// JSON config {experiment, parameters, output_dir}, fills in defaults,
// rejects unknown keys, and produces a manifest, a verdict and data files.

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace stochep {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kVersion = "0.1.0";

/// Version plus compiler; identical for identical builds.
std::string build_identifier();

/// Rejected configuration.
class ConfigError : public std::invalid_argument
{
 public:
  using std::invalid_argument::invalid_argument;
};

const std::vector<std::string>& experiment_names();

struct ExperimentConfig
{
  std::string experiment;
  /// Fully resolved after parse_config: every key the experiment reads, with defaults.
  nlohmann::json parameters = nlohmann::json::object();
  std::string output_dir = "out";
};

/// Accepts either a config object or a manifest written by a previous run
/// (its "config" member is used). Parameters are resolved against the
/// experiment's defaults; unknown keys and out-of-range values throw ConfigError.
ExperimentConfig parse_config(const nlohmann::json& doc);

/// Re-resolves after the caller changed `parameters` (e.g. a seed override).
ExperimentConfig resolve(ExperimentConfig config);

struct Check
{
  std::string name;
  bool pass = false;
  double value = 0.0;
  double tolerance = 0.0;
};

struct Artifact
{
  std::string filename;
  std::string content;
};

struct ExperimentOutput
{
  std::vector<Check> checks;
  std::vector<Artifact> artifacts;
  /// Experiment-specific manifest members (nu_eff, modes, ...).
  nlohmann::json manifest_extras = nlohmann::json::object();

  bool passed() const;
};

/// Runs a resolved config without touching the filesystem. The manifest and
/// verdict are appended to the artifacts.
ExperimentOutput execute(const ExperimentConfig& config);

/// execute() and write every artifact into config.output_dir.
ExperimentOutput run(const ExperimentConfig& config);

struct AuditOptions
{
  /// Negates the bracket (and therefore ad and ad*) of every so(3) geometry
  /// after its connection has been built.
  bool flip_ad_sign = false;
};

struct AuditRow
{
  std::string name;
  bool pass = false;
  double value = 0.0;
  double tolerance = 0.0;
};

std::vector<AuditRow> audit(const AuditOptions& options = {});

/// Fixed-width table, one row per invariant.
std::string format_audit(const std::vector<AuditRow>& rows);

/// Single-line JSON error record.
std::string error_line(const std::string& kind, const std::string& message,
                       std::optional<std::size_t> step = std::nullopt);

}  // namespace stochep
