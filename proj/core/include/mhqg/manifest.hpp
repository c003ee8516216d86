#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace mhqg {

std::string iso8601_utc_now();

// Provenance record written next to every command's outputs: the command,
// its configuration, the seed, content hashes of the inputs and timestamps.
struct RunManifest {
  std::string command;
  std::string config_json;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, sha256
  std::vector<std::string> outputs;
  std::string started_at;
  std::string finished_at;

  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path) { outputs.push_back(path.string()); }

  std::string to_json() const;
  // Writes <primary_output>.manifest.json.
  void write_next_to(const std::filesystem::path& primary_output) const;
};

}  // namespace mhqg
