#include "ncl/cli/manifest.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ncl/errors.hpp"

namespace ncl::cli {

void write_manifest(const std::string& out_dir, const RunManifest& manifest) {
  nlohmann::json j;
  j["config_hash"] = manifest.config_hash;
  j["seed"] = manifest.seed;
  j["tool_version"] = manifest.tool_version;
  j["outputs"] = manifest.outputs;
  j["wall_clock_seconds"] = manifest.wall_clock_seconds;
  j["status"] = manifest.status;
  if (!manifest.failed_stage.empty()) j["failed_stage"] = manifest.failed_stage;
  j["resolved_config"] = manifest.config.values();

  const std::filesystem::path dir(out_dir);
  const std::filesystem::path tmp = dir / "manifest.json.tmp";
  const std::filesystem::path final_path = dir / "manifest.json";
  {
    std::ofstream out(tmp);
    if (!out) throw ConfigError("cannot write manifest to " + tmp.string());
    out << j.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, final_path);
}

}  // namespace ncl::cli
