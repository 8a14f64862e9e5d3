#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "fedsched/config.hpp"

namespace fedsched {

/// Outcome of one CLI subcommand: files written (relative to the out dir) and
/// a short human-readable summary for stdout.
struct CommandResult {
    std::vector<std::string> outputs;
    std::string summary;
};

/// Dispatches a subcommand on an already-resolved config. `params` carries the
/// per-command arguments exactly as stored in manifests, so a replay follows
/// the same path as the original invocation.
CommandResult run_command(const std::string& subcommand, const RunConfig& cfg,
                          const nlohmann::json& params, const std::string& out_dir,
                          std::uint64_t seed);

/// Writes <out_dir>/manifest.json describing the run; replaying it reproduces
/// every output byte for byte.
std::string write_manifest(const std::string& subcommand, const RunConfig& cfg,
                           const nlohmann::json& params, std::uint64_t seed,
                           const std::vector<std::string>& outputs,
                           const std::string& out_dir);

/// Re-executes the run recorded in a manifest, writing into out_dir.
CommandResult replay_manifest(const std::string& manifest_path, const std::string& out_dir);

} // namespace fedsched
