#pragma once

#include <cstdint>
#include <vector>

#include "mhqg/ops.hpp"
#include "mhqg/rng.hpp"

namespace mhqg {

// Answer position tags, BIO over every answer span.
inline constexpr int kAnswerTagO = 0;
inline constexpr int kAnswerTagB = 1;
inline constexpr int kAnswerTagI = 2;
inline constexpr std::size_t kAnswerTagCount = 3;

struct EncoderInput {
  std::vector<int> token_ids;
  std::vector<int> answer_tags;  // BIO ids per token
  std::vector<int> ner_ids;
  std::vector<int> pos_ids;
  std::vector<int> case_ids;
  std::vector<std::uint8_t> node_mask;  // 1 where a graph node covers the token
  int answer_first_pos = -1;            // first B tag, -1 when absent

  std::size_t length() const { return token_ids.size(); }
};

struct LstmParams {
  num::Parameter w_input;   // (in, 4H), gate order i|f|g|o
  num::Parameter w_hidden;  // (H, 4H)
  num::Parameter bias;      // (4H,)
};

struct GruParams {
  num::Parameter w_input;   // (in, 3H), gate order z|r|n
  num::Parameter w_hidden;  // (H, 3H)
  num::Parameter bias;      // (3H,)
};

LstmParams make_lstm_params(const std::string& prefix, std::size_t in_dim, std::size_t hidden,
                            Rng& rng, double init_range);
GruParams make_gru_params(const std::string& prefix, std::size_t in_dim, std::size_t hidden,
                          Rng& rng, double init_range);

struct LstmState {
  num::Var hidden;
  num::Var cell;
};

// One recurrent step; zero initial states are the convention everywhere.
LstmState lstm_step(num::Tape& tape, LstmParams& p, num::Var x, const LstmState& prev);
num::Var gru_step(num::Tape& tape, GruParams& p, num::Var x, num::Var prev_hidden);

struct EmbedderParams {
  num::Parameter word;        // (vocab, word_dim)
  num::Parameter answer_pos;  // (3, answer_dim)
  num::Parameter case_emb;    // (n_case, feat_dim)
  num::Parameter ner_emb;     // (n_ner, feat_dim)
  num::Parameter pos_emb;     // (n_pos, feat_dim)
};

struct EncoderParams {
  EmbedderParams embed;
  LstmParams fwd;  // per-direction hidden D/2
  LstmParams bwd;
  // Self-attention scorer: score(i,j) = w_score . tanh(w_ctx h_j + w_self h_i)
  num::Parameter gsa_w_score;  // (Da,)
  num::Parameter gsa_w_self;   // (Da, D)
  num::Parameter gsa_w_ctx;    // (Da, D)
  GruParams gsa_fwd;           // input 2D, hidden D/2
  GruParams gsa_bwd;
  num::Parameter answer_gate_w;  // (D, D)

  void collect(std::vector<num::Parameter*>& out);
};

// Per token: word embedding + answer-position embedding + a lexical feature
// embedding that sums the case, NER and POS lookups. Output (M, E) with
// E = word_dim + answer_dim + feat_dim.
num::Var embed_tokens(num::Tape& tape, EncoderParams& p, const EncoderInput& input);

// Single-layer BiLSTM, per-direction width D/2, concatenated per token.
num::Var bilstm_encode(num::Tape& tape, EncoderParams& p, num::Var embedded);

struct SelfAttention {
  num::Var weights;   // (M, M); row i attends from position i, sums to 1
  num::Var contexts;  // (M, D); row i = attention-weighted sum of states
};

// score(i,j) = w_score . tanh(w_ctx h_j + w_self h_i), softmax over j.
SelfAttention self_attention(num::Tape& tape, EncoderParams& p, num::Var H);

// Attention-pooled context per token fused through a BiGRU over [h_i, o_i].
num::Var gated_self_attention(num::Tape& tape, EncoderParams& p, num::Var H);

// Scalar sigmoid gate against the answer vector (the self-attended state of
// the first answer token), applied to every row.
num::Var answer_gate(num::Tape& tape, EncoderParams& p, num::Var H_hat,
                     std::size_t answer_first_pos);

struct EncoderStates {
  num::Var embedded;  // (M, E)
  num::Var H;         // (M, D)
  num::Var H_hat;     // (M, D)
  num::Var H_a;       // (M, D)
};

EncoderStates encode_document(num::Tape& tape, EncoderParams& p, const EncoderInput& input);

}  // namespace mhqg
