#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>

#include "wmprobe/config.hpp"
#include "wmprobe/errors.hpp"

namespace wmprobe {

// Each command reads only its inputs and writes only under
// config.output_dir. Progress goes to `log`.

/// <output>/<Scenario>/{clean,stamped}/<id>.png + manifest.json per scenario.
void cmd_stamp(const AuditConfig& config, std::ostream& log);

/// Prints header and manifest fields, then PASS. On failure prints FAIL and
/// rethrows the error.
void cmd_validate(const std::filesystem::path& dump, std::ostream& log);

/// scores_<model>_<scenario>.csv per run, summary_<scenario>.csv per scenario.
void cmd_score(const AuditConfig& config, std::ostream& log);

/// rank_<model>_<scenario>.csv from existing score files.
void cmd_rank(const AuditConfig& config, std::ostream& log);

/// sweep.csv and output_auc_<alpha>.csv from existing score files.
void cmd_sweep(const AuditConfig& config, std::ostream& log);

/// plotdata_<scenario>.json, plus plotdata_sweep.json when sweep.csv exists.
void cmd_report(const AuditConfig& config, std::ostream& log);

/// Writes the planted synthetic task (probe dumps, train/eval embedding
/// sets) and a config.json wiring them into score/rank/sweep/report.
void cmd_synth(const std::filesystem::path& out_dir, std::uint64_t seed, std::ostream& log);

/// Single-line JSON: {"error", "message", "exit_code"[, "file", "offset"]}.
std::string error_json(const Error& error);

/// Full command line. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace wmprobe
