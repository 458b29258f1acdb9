#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wmprobe/linear_head.hpp"
#include "wmprobe/stamper.hpp"
#include "wmprobe/types.hpp"

namespace wmprobe {

struct ScenarioConfig {
  Scenario scenario = Scenario::Chinese;
  std::optional<std::filesystem::path> charset;  // built-in list when absent
  std::filesystem::path font;
  Rgba color{};
  std::uint64_t seed = 0;
  int string_length = 7;
  int font_size = 30;
};

struct ScoreRun {
  std::string model;
  Scenario scenario = Scenario::Chinese;
  std::filesystem::path clean;
  std::filesystem::path stamped;
};

struct SweepConfig {
  std::string model;
  Scenario scenario = Scenario::Chinese;
  std::optional<std::filesystem::path> scores;  // default: <output>/scores_<model>_<scenario>.csv
  std::filesystem::path train;
  std::filesystem::path eval;
  std::filesystem::path probe_clean;
  std::filesystem::path probe_stamped;
  std::vector<double> alphas = kDefaultAlphas;
  TrainingConfig training;
};

/// One JSON file drives every command. Relative paths resolve against the
/// config file's directory.
struct AuditConfig {
  int schema_version = 1;
  std::filesystem::path output_dir;
  unsigned threads = 1;

  std::optional<std::filesystem::path> baseline_dir;
  std::vector<ScenarioConfig> scenarios;

  std::vector<ScoreRun> runs;
  double threshold = kDefaultSensitiveThreshold;
  std::size_t top_k = 5;
  std::optional<std::filesystem::path> class_names;

  std::optional<SweepConfig> sweep;
};

/// Applies `key.path=value` overrides (value parsed as JSON, else taken as a
/// string) and parses. Throws ConfigError on schema violations.
AuditConfig parse_config(const std::string& json_text,
                         const std::filesystem::path& base_dir,
                         const std::vector<std::string>& overrides = {});
AuditConfig load_config(const std::filesystem::path& path,
                        const std::vector<std::string>& overrides = {});

enum class Command { Stamp, Score, Rank, Sweep, Report };

/// Checks that every path the command reads exists and that the sections it
/// needs are present.
void validate_for(const AuditConfig& config, Command command);

WatermarkSpec make_watermark_spec(const ScenarioConfig& scenario);

std::filesystem::path scores_path(const AuditConfig& config, const std::string& model,
                                  Scenario scenario);

}  // namespace wmprobe
