#include "mhqg/encoder.hpp"

#include "mhqg/common.hpp"

namespace mhqg {

using num::Tape;
using num::Tensor;
using num::Var;

namespace {

Tensor uniform_tensor(std::vector<std::size_t> shape, Rng& rng, double range) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = rng.uniform(-range, range);
  return t;
}

std::vector<std::size_t> to_indices(const std::vector<int>& ids, std::size_t table_rows,
                                    const char* what) {
  std::vector<std::size_t> out;
  out.reserve(ids.size());
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= table_rows) {
      throw DataError(std::string(what) + " id " + std::to_string(id) +
                      " out of range (table has " + std::to_string(table_rows) + " rows)");
    }
    out.push_back(static_cast<std::size_t>(id));
  }
  return out;
}

Var row_vec(Tape&, Var matrix, std::size_t row) {
  Var r = num::rows(matrix, {row});
  return num::reshape(r, {r.value().extent(1)});
}

}  // namespace

LstmParams make_lstm_params(const std::string& prefix, std::size_t in_dim, std::size_t hidden,
                            Rng& rng, double init_range) {
  LstmParams p{
      num::Parameter(prefix + ".w_input", uniform_tensor({in_dim, 4 * hidden}, rng, init_range)),
      num::Parameter(prefix + ".w_hidden", uniform_tensor({hidden, 4 * hidden}, rng, init_range)),
      num::Parameter(prefix + ".bias", Tensor::zeros({4 * hidden}))};
  // Forget-gate bias starts at 1 so early training does not wash out state.
  for (std::size_t i = hidden; i < 2 * hidden; ++i) p.bias.value.at(i) = 1.0;
  return p;
}

GruParams make_gru_params(const std::string& prefix, std::size_t in_dim, std::size_t hidden,
                          Rng& rng, double init_range) {
  return GruParams{
      num::Parameter(prefix + ".w_input", uniform_tensor({in_dim, 3 * hidden}, rng, init_range)),
      num::Parameter(prefix + ".w_hidden", uniform_tensor({hidden, 3 * hidden}, rng, init_range)),
      num::Parameter(prefix + ".bias", Tensor::zeros({3 * hidden}))};
}

LstmState lstm_step(Tape& tape, LstmParams& p, Var x, const LstmState& prev) {
  const std::size_t h = p.w_hidden.value.extent(0);
  Var wx = tape.leaf(p.w_input);
  Var wh = tape.leaf(p.w_hidden);
  Var b = tape.leaf(p.bias);

  Var gates = num::add(num::add(num::matmul(x, wx), num::matmul(prev.hidden, wh)), b);
  Var i = num::sigmoid(num::slice(gates, 0, 0, h));
  Var f = num::sigmoid(num::slice(gates, 0, h, h));
  Var g = num::tanh(num::slice(gates, 0, 2 * h, h));
  Var o = num::sigmoid(num::slice(gates, 0, 3 * h, h));
  Var cell = num::add(num::mul(f, prev.cell), num::mul(i, g));
  Var hidden = num::mul(o, num::tanh(cell));
  return LstmState{hidden, cell};
}

Var gru_step(Tape& tape, GruParams& p, Var x, Var prev_hidden) {
  const std::size_t h = p.w_hidden.value.extent(0);
  Var wx = tape.leaf(p.w_input);
  Var wh = tape.leaf(p.w_hidden);
  Var b = tape.leaf(p.bias);

  Var gx = num::add(num::matmul(x, wx), b);  // (3H,)
  Var hu = num::matmul(prev_hidden, num::slice(wh, 1, 0, 2 * h));
  Var z = num::sigmoid(num::add(num::slice(gx, 0, 0, h), num::slice(hu, 0, 0, h)));
  Var r = num::sigmoid(num::add(num::slice(gx, 0, h, h), num::slice(hu, 0, h, h)));
  Var cand_h = num::matmul(num::mul(r, prev_hidden), num::slice(wh, 1, 2 * h, h));
  Var n = num::tanh(num::add(num::slice(gx, 0, 2 * h, h), cand_h));
  // h' = (1 - z) * h + z * n
  Var one = tape.constant(Tensor::full({h}, 1.0));
  return num::add(num::mul(num::sub(one, z), prev_hidden), num::mul(z, n));
}

void EncoderParams::collect(std::vector<num::Parameter*>& out) {
  out.push_back(&embed.word);
  out.push_back(&embed.answer_pos);
  out.push_back(&embed.case_emb);
  out.push_back(&embed.ner_emb);
  out.push_back(&embed.pos_emb);
  for (LstmParams* l : {&fwd, &bwd}) {
    out.push_back(&l->w_input);
    out.push_back(&l->w_hidden);
    out.push_back(&l->bias);
  }
  out.push_back(&gsa_w_score);
  out.push_back(&gsa_w_self);
  out.push_back(&gsa_w_ctx);
  for (GruParams* g : {&gsa_fwd, &gsa_bwd}) {
    out.push_back(&g->w_input);
    out.push_back(&g->w_hidden);
    out.push_back(&g->bias);
  }
  out.push_back(&answer_gate_w);
}

Var embed_tokens(Tape& tape, EncoderParams& p, const EncoderInput& input) {
  const std::size_t m = input.length();
  if (m == 0) throw DataError("cannot embed an empty token sequence");
  if (input.answer_tags.size() != m || input.ner_ids.size() != m || input.pos_ids.size() != m ||
      input.case_ids.size() != m) {
    throw DataError("encoder input id sequences have inconsistent lengths");
  }
  EmbedderParams& ep = p.embed;
  Var word = num::embedding_lookup(
      tape.leaf(ep.word), to_indices(input.token_ids, ep.word.value.extent(0), "token"));
  Var ans = num::embedding_lookup(
      tape.leaf(ep.answer_pos),
      to_indices(input.answer_tags, ep.answer_pos.value.extent(0), "answer tag"));
  Var cas = num::embedding_lookup(
      tape.leaf(ep.case_emb), to_indices(input.case_ids, ep.case_emb.value.extent(0), "case"));
  Var ner = num::embedding_lookup(
      tape.leaf(ep.ner_emb), to_indices(input.ner_ids, ep.ner_emb.value.extent(0), "ner"));
  Var pos = num::embedding_lookup(
      tape.leaf(ep.pos_emb), to_indices(input.pos_ids, ep.pos_emb.value.extent(0), "pos"));
  Var feat = num::add(num::add(cas, ner), pos);
  return num::concat({word, ans, feat}, 1);
}

Var bilstm_encode(Tape& tape, EncoderParams& p, Var embedded) {
  const std::size_t m = embedded.value().extent(0);
  const std::size_t h = p.fwd.w_hidden.value.extent(0);

  std::vector<Var> fwd_rows(m, Var{});
  std::vector<Var> bwd_rows(m, Var{});

  LstmState state{tape.constant(Tensor::zeros({h})), tape.constant(Tensor::zeros({h}))};
  for (std::size_t t = 0; t < m; ++t) {
    state = lstm_step(tape, p.fwd, row_vec(tape, embedded, t), state);
    fwd_rows[t] = state.hidden;
  }
  state = LstmState{tape.constant(Tensor::zeros({h})), tape.constant(Tensor::zeros({h}))};
  for (std::size_t t = m; t-- > 0;) {
    state = lstm_step(tape, p.bwd, row_vec(tape, embedded, t), state);
    bwd_rows[t] = state.hidden;
  }

  std::vector<Var> rows;
  rows.reserve(m);
  for (std::size_t t = 0; t < m; ++t) rows.push_back(num::concat({fwd_rows[t], bwd_rows[t]}, 0));
  return num::stack_rows(rows);
}

SelfAttention self_attention(Tape& tape, EncoderParams& p, Var H) {
  const std::size_t m = H.value().extent(0);
  Var w_score = tape.leaf(p.gsa_w_score);
  Var w_self = tape.leaf(p.gsa_w_self);
  Var w_ctx = tape.leaf(p.gsa_w_ctx);

  Var ctx_proj = num::matmul(H, num::transpose(w_ctx));    // (M, Da)
  Var self_proj = num::matmul(H, num::transpose(w_self));  // (M, Da)
  Var H_T = num::transpose(H);                             // (D, M)

  std::vector<Var> attn_rows, ctx_rows;
  attn_rows.reserve(m);
  ctx_rows.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    Var qi = row_vec(tape, self_proj, i);                                  // (Da,)
    Var scores = num::matmul(num::tanh(num::add(ctx_proj, qi)), w_score);  // (M,)
    Var attn = num::softmax(scores, 0);
    attn_rows.push_back(attn);
    ctx_rows.push_back(num::matmul(H_T, attn));  // (D,)
  }
  return SelfAttention{num::stack_rows(attn_rows), num::stack_rows(ctx_rows)};
}

Var gated_self_attention(Tape& tape, EncoderParams& p, Var H) {
  const std::size_t m = H.value().extent(0);
  const SelfAttention attn = self_attention(tape, p, H);

  std::vector<Var> fused;
  fused.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    fused.push_back(num::concat({row_vec(tape, H, i), row_vec(tape, attn.contexts, i)}, 0));
  }

  const std::size_t h = p.gsa_fwd.w_hidden.value.extent(0);
  std::vector<Var> fwd_rows(m, Var{});
  std::vector<Var> bwd_rows(m, Var{});
  Var hidden = tape.constant(Tensor::zeros({h}));
  for (std::size_t t = 0; t < m; ++t) {
    hidden = gru_step(tape, p.gsa_fwd, fused[t], hidden);
    fwd_rows[t] = hidden;
  }
  hidden = tape.constant(Tensor::zeros({h}));
  for (std::size_t t = m; t-- > 0;) {
    hidden = gru_step(tape, p.gsa_bwd, fused[t], hidden);
    bwd_rows[t] = hidden;
  }
  std::vector<Var> rows;
  rows.reserve(m);
  for (std::size_t t = 0; t < m; ++t) rows.push_back(num::concat({fwd_rows[t], bwd_rows[t]}, 0));
  return num::stack_rows(rows);
}

Var answer_gate(Tape& tape, EncoderParams& p, Var H_hat, std::size_t answer_first_pos) {
  const std::size_t m = H_hat.value().extent(0);
  if (answer_first_pos >= m) {
    throw DataError("answer position " + std::to_string(answer_first_pos) +
                    " outside sequence of length " + std::to_string(m));
  }
  Var w = tape.leaf(p.answer_gate_w);
  Var a = row_vec(tape, H_hat, answer_first_pos);  // (D,)
  Var u = num::matmul(a, w);                       // (D,)
  Var gate = num::sigmoid(num::matmul(H_hat, u));  // (M,)
  return num::scale_rows(H_hat, gate);
}

EncoderStates encode_document(Tape& tape, EncoderParams& p, const EncoderInput& input) {
  if (input.answer_first_pos < 0) {
    throw DataError("encoder input has no answer position");
  }
  EncoderStates s;
  s.embedded = embed_tokens(tape, p, input);
  s.H = bilstm_encode(tape, p, s.embedded);
  s.H_hat = gated_self_attention(tape, p, s.H);
  s.H_a = answer_gate(tape, p, s.H_hat, static_cast<std::size_t>(input.answer_first_pos));
  return s;
}

}  // namespace mhqg
