#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "mhqg/encoder.hpp"
#include "mhqg/vocabulary.hpp"

namespace mhqg {

// Base vocabulary extended, per example, with the source-only tokens the
// copy mechanism can reach. Extended ids start at base size and follow first
// occurrence order in the source, so they are stable within one example.
class ExtendedVocab {
 public:
  ExtendedVocab() = default;

  static ExtendedVocab build(const Vocabulary& base,
                             const std::vector<std::string>& source_folded);

  std::size_t base_size() const { return base_size_; }
  std::size_t size() const { return base_size_ + extra_.size(); }
  bool is_extended(int id) const { return id >= 0 && static_cast<std::size_t>(id) >= base_size_; }

  // Base id if in the base vocabulary, extended id if copyable from this
  // example's source, UNK otherwise.
  int encode(const std::string& folded) const;
  const std::string& decode(int id) const;

 private:
  const Vocabulary* base_ = nullptr;  // outlives the example pipeline
  std::size_t base_size_ = 0;
  std::vector<std::string> extra_;
  std::unordered_map<std::string, int> extra_ids_;
};

struct DecoderParams {
  LstmParams cell;               // input word_dim + D, hidden D
  num::Parameter attn_w;         // (D, D)
  num::Parameter copy_w_state;   // (D,)
  num::Parameter copy_w_ctx;     // (D,)
  num::Parameter copy_bias;      // (1,)
  num::Parameter out_w;          // (V, 2D)
  num::Parameter out_b;          // (V,)

  void collect(std::vector<num::Parameter*>& out);
};

DecoderParams make_decoder_params(std::size_t word_dim, std::size_t hidden,
                                  std::size_t vocab_size, Rng& rng, double init_range);

// Everything a decode step needs about the encoded example.
struct DecodeContext {
  num::Var memory;    // (M, D) entity-aware token states
  num::Var memory_t;  // (D, M)
  num::Var summary;   // (D,) initial decoder state
  std::vector<std::size_t> source_ext_ids;  // extended id per source position
  const ExtendedVocab* ext = nullptr;
};

struct DecodeStep {
  LstmState state;     // s_t and LSTM memory, feed to the next step
  num::Var context;    // c_t (D,)
  num::Var attention;  // (M,), sums to 1
  num::Var copy_gate;  // scalar in (0,1)
  num::Var p_final;    // (ext_size,), mixture over the extended vocabulary
};

// One decoder step: attention over the memory, copy/generate gate, final
// mixture distribution. Copy probability mass is the attention row summed
// onto each source token's extended id.
DecodeStep decode_step(num::Tape& tape, DecoderParams& params, num::Var prev_word_embed,
                       const LstmState& prev, num::Var prev_context, const DecodeContext& ctx);

// Mean over steps of -log p_final(reference token); the reference is the
// gold token sequence followed by EOS, teacher-forced. Reference tokens
// outside both vocabularies map to UNK.
num::Var teacher_forced_nll(num::Tape& tape, DecoderParams& params,
                            num::Parameter& word_embedding, const DecodeContext& ctx,
                            const std::vector<int>& reference_ext_ids);

enum class Provenance { GENERATED, COPIED };

struct GenerationStep {
  std::string token;
  Provenance provenance = Provenance::GENERATED;
  int source_position = -1;  // set when copied
  std::vector<double> attention;
};

struct GenerationResult {
  std::vector<std::string> tokens;  // body, without BOS/EOS
  double log_prob = 0.0;            // total accumulated log probability
  double score = 0.0;               // log_prob / emitted steps
  bool ended_with_eos = false;
  std::vector<GenerationStep> steps;  // includes the EOS emission when present
};

GenerationResult greedy_decode(num::Tape& tape, DecoderParams& params,
                               num::Parameter& word_embedding, const DecodeContext& ctx,
                               std::size_t max_len);

// Beam search with length-normalized ranking of finished hypotheses.
std::vector<GenerationResult> beam_search(num::Tape& tape, DecoderParams& params,
                                          num::Parameter& word_embedding,
                                          const DecodeContext& ctx, std::size_t beam_size,
                                          std::size_t max_len);

}  // namespace mhqg
