#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mhqg/adam.hpp"

namespace mhqg {

// Checkpoint contents besides parameter values. config_json carries the
// model and training configuration snapshots; vocab_digest ties the
// checkpoint to the vocabulary it was trained with.
struct CheckpointMeta {
  std::string config_json;
  std::string vocab_digest;
  std::uint64_t epoch = 0;
  double best_dev_bleu4 = 0.0;
};

// Binary, versioned, byte-stable for identical values: named parameter
// table (shape list + row-major doubles) plus optional optimizer moments.
void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<num::Parameter*>& params, const num::Adam* optimizer,
                     const CheckpointMeta& meta);

// Reads metadata only (to size the model before loading values).
CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path);

// Loads values into an existing parameter list; names and shapes must match
// exactly. Restores optimizer moments when both the file and the caller
// carry them.
void load_checkpoint(const std::filesystem::path& path, const std::vector<num::Parameter*>& params,
                     num::Adam* optimizer, CheckpointMeta* meta_out);

}  // namespace mhqg
