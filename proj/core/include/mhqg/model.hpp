#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mhqg/decoder.hpp"
#include "mhqg/encoder.hpp"
#include "mhqg/entity_graph.hpp"
#include "mhqg/reasoner.hpp"
#include "mhqg/vocabulary.hpp"

namespace mhqg {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t word_dim = 300;
  std::size_t answer_dim = 16;
  std::size_t feat_dim = 16;
  std::size_t hidden = 256;  // D, even (two recurrent directions)
  std::size_t attn_dim = 0;  // self-attention scorer width; 0 means hidden
  std::size_t rgcn_layers = 3;
  std::size_t rgcn_bases = 2;
  std::size_t case_count = 4;
  std::size_t ner_count = 0;
  std::size_t pos_count = 0;
  double init_range = 0.08;

  void validate() const;
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

// A corpus example turned into model inputs: flat id sequences, the grounded
// graph with global mention offsets, the per-example extended vocabulary and
// the reference mapped into it.
struct ModelExample {
  std::string example_id;
  EncoderInput input;
  EntityGraph graph;
  std::vector<std::string> source_folded;
  std::vector<std::size_t> source_ext_ids;
  ExtendedVocab ext;
  std::vector<int> reference_ids;
  std::vector<std::string> reference_folded;
};

// Caps the flat token count, keeping leading documents whole and cutting the
// overflowing document's text; out-of-range coreference and answer spans are
// dropped (clusters need >=2 surviving spans).
AnnotatedExample truncate_example(AnnotatedExample example, std::size_t max_tokens);

class Featurizer {
 public:
  Featurizer(const Vocabulary& vocab, TagSet ner_tags, TagSet pos_tags,
             std::size_t max_source_tokens);

  ModelExample featurize(const AnnotatedExample& example) const;

  const Vocabulary& vocab() const { return *vocab_; }
  const TagSet& ner_tags() const { return ner_tags_; }
  const TagSet& pos_tags() const { return pos_tags_; }

 private:
  const Vocabulary* vocab_;
  TagSet ner_tags_;
  TagSet pos_tags_;
  std::size_t max_source_tokens_;
};

// The full generation model: answer-focused encoder, graph reasoner with its
// aggregation layer, copy-mechanism decoder. Parameters are owned here;
// forward passes are pure given a tape.
class QgModel {
 public:
  QgModel(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  // Stable registration order: encoder, reasoner, decoder.
  std::vector<num::Parameter*> parameters();

  struct Forward {
    EncoderStates enc;
    std::vector<num::Var> node_layers;
    num::Var memory;    // (M, D)
    num::Var memory_t;  // (D, M)
    num::Var summary;   // (D,)
  };

  Forward forward(num::Tape& tape, const ModelExample& example);
  DecodeContext decode_context(const Forward& fwd, const ModelExample& example) const;

  num::Var loss(num::Tape& tape, const ModelExample& example);

  GenerationResult greedy(num::Tape& tape, const ModelExample& example, std::size_t max_len);
  std::vector<GenerationResult> beam(num::Tape& tape, const ModelExample& example,
                                     std::size_t beam_size, std::size_t max_len);

  // Loads word vectors in the usual text format (token then values); rows
  // for tokens outside the vocabulary are ignored. Returns how many rows
  // were loaded.
  std::size_t load_pretrained_embeddings(const std::filesystem::path& path,
                                         const Vocabulary& vocab);

  EncoderParams& encoder() { return encoder_; }
  ReasonerParams& reasoner() { return reasoner_; }
  DecoderParams& decoder() { return decoder_; }

 private:
  ModelConfig config_;
  EncoderParams encoder_;
  ReasonerParams reasoner_;
  DecoderParams decoder_;
};

}  // namespace mhqg
