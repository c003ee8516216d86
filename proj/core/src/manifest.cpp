#include "mhqg/manifest.hpp"

#include <ctime>
#include <fstream>

#include <nlohmann/json.hpp>

#include "mhqg/common.hpp"
#include "mhqg/hash.hpp"

namespace mhqg {

using nlohmann::json;

std::string iso8601_utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void RunManifest::add_input(const std::filesystem::path& path) {
  inputs.emplace_back(path.string(), sha256_file_hex(path));
}

std::string RunManifest::to_json() const {
  json ins = json::array();
  for (const auto& [path, digest] : inputs) {
    ins.push_back(json{{"path", path}, {"sha256", digest}});
  }
  json j{{"command", command},
         {"config", config_json.empty() ? json::object() : json::parse(config_json)},
         {"seed", seed},
         {"inputs", std::move(ins)},
         {"outputs", outputs},
         {"started_at", started_at},
         {"finished_at", finished_at}};
  return j.dump(2);
}

void RunManifest::write_next_to(const std::filesystem::path& primary_output) const {
  const std::filesystem::path path = primary_output.string() + ".manifest.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest: " + path.string());
  out << to_json() << "\n";
}

}  // namespace mhqg
