#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mhqg/checkpoint.hpp"
#include "mhqg/metrics.hpp"
#include "mhqg/model.hpp"

namespace mhqg {

struct TrainConfig {
  // Optimization.
  std::size_t batch_size = 16;
  std::size_t epochs = 20;
  double learning_rate = 1e-3;
  // Consecutive epochs without a dev BLEU-4 improvement before the learning
  // rate halves; 0 disables the schedule.
  std::size_t lr_halving_patience = 1;
  double grad_clip_norm = 5.0;
  // Early stop once mean train loss drops below this; 0 disables.
  double target_train_loss = 0.0;
  std::uint64_t seed = 13;
  std::string precision = "double";  // all math is double precision

  // Model dimensions.
  std::size_t word_dim = 300;
  std::size_t answer_dim = 16;
  std::size_t feat_dim = 16;
  std::size_t hidden = 256;
  std::size_t attn_dim = 0;
  std::size_t rgcn_layers = 3;
  std::size_t rgcn_bases = 2;

  // Data handling.
  std::size_t max_source_tokens = 384;
  std::size_t max_decode_len = 48;
  std::size_t beam_size = 5;
  std::size_t vocab_max_size = 50000;
  std::uint64_t vocab_min_freq = 1;
  std::string pretrained_embeddings;  // optional word-vector file

  void validate() const;
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);

  // key = value lines, '#' comments.
  static TrainConfig from_file(const std::filesystem::path& path);
  // Single key override (command line flags beat config file keys).
  void set(const std::string& key, const std::string& value);
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double dev_bleu4 = 0.0;
  double lr_after = 0.0;
  bool improved = false;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::filesystem::path best_checkpoint;
  std::filesystem::path last_checkpoint;
  std::filesystem::path vocab_file;
  double best_dev_bleu4 = 0.0;
  std::size_t skipped_examples = 0;
};

// End-to-end training: builds the vocabulary from the train split, trains
// with teacher-forced NLL and Adam, decodes the dev split greedily after
// each epoch and halves the learning rate when dev BLEU-4 stops improving.
// Writes vocab.tsv, best.ckpt, last.ckpt and train_log.jsonl into out_dir.
// NaN/Inf losses abort with DivergenceError.
TrainResult train(const std::vector<AnnotatedExample>& train_split,
                  const std::vector<AnnotatedExample>& dev_split, const TagSet& ner_tags,
                  const TagSet& pos_tags, const TrainConfig& config,
                  const std::filesystem::path& out_dir);

struct EvalResult {
  MetricReport report;
  std::vector<std::pair<std::string, GenerationResult>> generations;  // example_id, result
};

// Loads a checkpoint (vocabulary digest must match), decodes every example
// with beam search and scores the output.
EvalResult evaluate_checkpoint(const std::filesystem::path& checkpoint_path,
                               const Vocabulary& vocab, const TagSet& ner_tags,
                               const TagSet& pos_tags,
                               const std::vector<AnnotatedExample>& examples,
                               std::size_t beam_size, std::optional<std::size_t> max_len = {});

}  // namespace mhqg
