#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ncl/cli/config.hpp"

namespace ncl::cli {

/// Run record written at the end of every subcommand: the resolved config
/// (re-runnable verbatim), its hash, the seed actually used, the tool
/// version, every output file, and wall-clock time. Written atomically
/// (temp file + rename) as <out_dir>/manifest.json.
struct RunManifest {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string tool_version;
  std::vector<std::string> outputs;  // paths relative to the output dir
  double wall_clock_seconds = 0.0;
  std::string status = "complete";   // or "failed"
  std::string failed_stage;          // set when status == failed
  ResolvedConfig config;
};

void write_manifest(const std::string& out_dir, const RunManifest& manifest);

}  // namespace ncl::cli
