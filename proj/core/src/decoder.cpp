#include "mhqg/decoder.hpp"

#include <algorithm>
#include <cmath>

#include "mhqg/common.hpp"

namespace mhqg {

using num::Tape;
using num::Tensor;
using num::Var;

ExtendedVocab ExtendedVocab::build(const Vocabulary& base,
                                   const std::vector<std::string>& source_folded) {
  ExtendedVocab ev;
  ev.base_ = &base;
  ev.base_size_ = base.size();
  for (const std::string& tok : source_folded) {
    if (base.encode(tok) != Vocabulary::kUnk) continue;
    if (ev.extra_ids_.count(tok)) continue;
    ev.extra_ids_.emplace(tok, static_cast<int>(ev.base_size_ + ev.extra_.size()));
    ev.extra_.push_back(tok);
  }
  return ev;
}

int ExtendedVocab::encode(const std::string& folded) const {
  const int base_id = base_->encode(folded);
  if (base_id != Vocabulary::kUnk) return base_id;
  const auto it = extra_ids_.find(folded);
  return it == extra_ids_.end() ? Vocabulary::kUnk : it->second;
}

const std::string& ExtendedVocab::decode(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= size()) {
    throw DataError("extended vocabulary id out of range: " + std::to_string(id));
  }
  if (static_cast<std::size_t>(id) < base_size_) return base_->decode(id);
  return extra_[static_cast<std::size_t>(id) - base_size_];
}

void DecoderParams::collect(std::vector<num::Parameter*>& out) {
  out.push_back(&cell.w_input);
  out.push_back(&cell.w_hidden);
  out.push_back(&cell.bias);
  out.push_back(&attn_w);
  out.push_back(&copy_w_state);
  out.push_back(&copy_w_ctx);
  out.push_back(&copy_bias);
  out.push_back(&out_w);
  out.push_back(&out_b);
}

namespace {

Tensor uniform_tensor(std::vector<std::size_t> shape, Rng& rng, double range) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = rng.uniform(-range, range);
  return t;
}

// Input embedding of the previously emitted token; extended (source-only)
// tokens have no trained row and use UNK.
Var input_embedding(Tape& tape, num::Parameter& word_embedding, int ext_id,
                    std::size_t base_size) {
  std::size_t row = static_cast<std::size_t>(Vocabulary::kUnk);
  if (ext_id >= 0 && static_cast<std::size_t>(ext_id) < base_size) {
    row = static_cast<std::size_t>(ext_id);
  }
  Var r = num::embedding_lookup(tape.leaf(word_embedding), {row});
  return num::reshape(r, {r.value().extent(1)});
}

}  // namespace

DecoderParams make_decoder_params(std::size_t word_dim, std::size_t hidden,
                                  std::size_t vocab_size, Rng& rng, double init_range) {
  DecoderParams p{
      make_lstm_params("decoder.cell", word_dim + hidden, hidden, rng, init_range),
      num::Parameter("decoder.attn_w", uniform_tensor({hidden, hidden}, rng, init_range)),
      num::Parameter("decoder.copy_w_state", uniform_tensor({hidden}, rng, init_range)),
      num::Parameter("decoder.copy_w_ctx", uniform_tensor({hidden}, rng, init_range)),
      num::Parameter("decoder.copy_bias", Tensor::zeros({1})),
      num::Parameter("decoder.out_w", uniform_tensor({vocab_size, 2 * hidden}, rng, init_range)),
      num::Parameter("decoder.out_b", Tensor::zeros({vocab_size}))};
  return p;
}

DecodeStep decode_step(Tape& tape, DecoderParams& params, Var prev_word_embed,
                       const LstmState& prev, Var prev_context, const DecodeContext& ctx) {
  const std::size_t ext_size = ctx.ext->size();
  const std::size_t base_size = ctx.ext->base_size();

  DecodeStep out;
  out.state = lstm_step(tape, params.cell, num::concat({prev_word_embed, prev_context}, 0), prev);

  Var attn_w = tape.leaf(params.attn_w);
  Var scores = num::matmul(ctx.memory, num::matmul(attn_w, out.state.hidden));  // (M,)
  out.attention = num::softmax(scores, 0);
  out.context = num::matmul(ctx.memory_t, out.attention);  // (D,)

  Var gate_pre = num::add(
      num::add(num::sum_all(num::mul(tape.leaf(params.copy_w_state), out.state.hidden)),
               num::sum_all(num::mul(tape.leaf(params.copy_w_ctx), out.context))),
      tape.leaf(params.copy_bias));
  out.copy_gate = num::sigmoid(gate_pre);  // scalar

  Var logits = num::add(num::matmul(tape.leaf(params.out_w),
                                    num::concat({out.state.hidden, out.context}, 0)),
                        tape.leaf(params.out_b));
  Var p_generate = num::softmax(logits, 0);  // (V,)

  // Copy mass: attention summed per extended id (repeated tokens pool).
  Var p_copy = num::scatter_add(out.attention, ctx.source_ext_ids, ext_size);

  Var p_generate_ext = p_generate;
  if (ext_size > base_size) {
    Var zeros = tape.constant(Tensor::zeros({ext_size - base_size}));
    p_generate_ext = num::concat({p_generate, zeros}, 0);
  }

  Var one = tape.constant(Tensor::scalar(1.0));
  out.p_final = num::add(num::scale(p_copy, out.copy_gate),
                         num::scale(p_generate_ext, num::sub(one, out.copy_gate)));
  return out;
}

num::Var teacher_forced_nll(Tape& tape, DecoderParams& params, num::Parameter& word_embedding,
                            const DecodeContext& ctx, const std::vector<int>& reference_ext_ids) {
  if (reference_ext_ids.empty()) {
    throw DataError("teacher forcing needs a non-empty reference");
  }
  const std::size_t hidden = ctx.summary.value().extent(0);
  const std::size_t base_size = ctx.ext->base_size();

  std::vector<int> targets = reference_ext_ids;
  targets.push_back(Vocabulary::kEos);

  LstmState state{ctx.summary, tape.constant(Tensor::zeros({hidden}))};
  Var context = tape.constant(Tensor::zeros({hidden}));
  int prev_token = Vocabulary::kBos;

  Var total{};
  for (std::size_t t = 0; t < targets.size(); ++t) {
    Var w = input_embedding(tape, word_embedding, prev_token, base_size);
    DecodeStep step = decode_step(tape, params, w, state, context, ctx);
    const int target = targets[t];
    if (target < 0 || static_cast<std::size_t>(target) >= ctx.ext->size()) {
      throw DataError("reference id outside the extended vocabulary");
    }
    Var step_nll = num::neg(num::log(num::pick(step.p_final, static_cast<std::size_t>(target))));
    total = (t == 0) ? step_nll : num::add(total, step_nll);

    state = step.state;
    context = step.context;
    prev_token = target;
  }
  return num::scale_const(total, 1.0 / static_cast<double>(targets.size()));
}

namespace {

struct LiveHyp {
  LstmState state;
  Var context{};
  int prev_token = Vocabulary::kBos;
  double log_prob = 0.0;
  std::vector<GenerationStep> steps;
  std::vector<std::string> tokens;
};

// Top-k extended ids by probability; ties break toward the lower id so
// beam size 1 and greedy argmax agree exactly.
std::vector<std::size_t> top_ids(const Tensor& probs, std::size_t k) {
  std::vector<std::size_t> ids(probs.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  const std::size_t keep = std::min(k, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + keep, ids.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (probs.at(a) != probs.at(b)) return probs.at(a) > probs.at(b);
                      return a < b;
                    });
  ids.resize(keep);
  return ids;
}

GenerationStep make_step(const DecodeStep& step, const DecodeContext& ctx, std::size_t ext_id) {
  GenerationStep g;
  g.token = ctx.ext->decode(static_cast<int>(ext_id));
  const Tensor& attn = step.attention.value();
  g.attention.assign(attn.data(), attn.data() + attn.size());

  const double gate = step.copy_gate.value().at(0);
  double copy_mass = 0.0;
  int best_pos = -1;
  double best_attn = -1.0;
  for (std::size_t pos = 0; pos < ctx.source_ext_ids.size(); ++pos) {
    if (ctx.source_ext_ids[pos] != ext_id) continue;
    copy_mass += attn.at(pos);
    if (attn.at(pos) > best_attn) {
      best_attn = attn.at(pos);
      best_pos = static_cast<int>(pos);
    }
  }
  double generate_mass = 0.0;
  if (ext_id < ctx.ext->base_size()) {
    // p_final = gate*copy + (1-gate)*generate; recover the generate share.
    generate_mass = step.p_final.value().at(ext_id) - gate * copy_mass;
  }
  if (best_pos >= 0 && gate * copy_mass >= generate_mass) {
    g.provenance = Provenance::COPIED;
    g.source_position = best_pos;
  } else {
    g.provenance = Provenance::GENERATED;
  }
  return g;
}

GenerationResult finish(LiveHyp hyp, bool ended_with_eos) {
  GenerationResult r;
  r.tokens = std::move(hyp.tokens);
  r.log_prob = hyp.log_prob;
  const std::size_t emitted = std::max<std::size_t>(1, hyp.steps.size());
  r.score = hyp.log_prob / static_cast<double>(emitted);
  r.ended_with_eos = ended_with_eos;
  r.steps = std::move(hyp.steps);
  return r;
}

}  // namespace

GenerationResult greedy_decode(Tape& tape, DecoderParams& params, num::Parameter& word_embedding,
                               const DecodeContext& ctx, std::size_t max_len) {
  if (max_len < 1) throw ConfigError("max decode length must be at least 1");
  const std::size_t hidden = ctx.summary.value().extent(0);
  LiveHyp hyp;
  hyp.state = LstmState{ctx.summary, tape.constant(Tensor::zeros({hidden}))};
  hyp.context = tape.constant(Tensor::zeros({hidden}));

  for (std::size_t t = 0; t < max_len; ++t) {
    Var w = input_embedding(tape, word_embedding, hyp.prev_token, ctx.ext->base_size());
    DecodeStep step = decode_step(tape, params, w, hyp.state, hyp.context, ctx);
    const std::size_t best = top_ids(step.p_final.value(), 1).front();
    hyp.log_prob += std::log(step.p_final.value().at(best));
    hyp.steps.push_back(make_step(step, ctx, best));
    hyp.state = step.state;
    hyp.context = step.context;
    if (best == static_cast<std::size_t>(Vocabulary::kEos)) {
      return finish(std::move(hyp), true);
    }
    hyp.tokens.push_back(ctx.ext->decode(static_cast<int>(best)));
    hyp.prev_token = static_cast<int>(best);
  }
  return finish(std::move(hyp), false);
}

std::vector<GenerationResult> beam_search(Tape& tape, DecoderParams& params,
                                          num::Parameter& word_embedding,
                                          const DecodeContext& ctx, std::size_t beam_size,
                                          std::size_t max_len) {
  if (beam_size < 1) throw ConfigError("beam size must be at least 1");
  if (max_len < 1) throw ConfigError("max decode length must be at least 1");
  const std::size_t hidden = ctx.summary.value().extent(0);

  std::vector<LiveHyp> live(1);
  live[0].state = LstmState{ctx.summary, tape.constant(Tensor::zeros({hidden}))};
  live[0].context = tape.constant(Tensor::zeros({hidden}));

  std::vector<GenerationResult> pool;

  for (std::size_t t = 0; t < max_len && !live.empty(); ++t) {
    struct Candidate {
      std::size_t hyp;
      std::size_t ext_id;
      double log_prob;
      DecodeStep step;
    };
    std::vector<Candidate> candidates;
    std::vector<DecodeStep> steps;
    steps.reserve(live.size());
    for (std::size_t h = 0; h < live.size(); ++h) {
      Var w = input_embedding(tape, word_embedding, live[h].prev_token, ctx.ext->base_size());
      DecodeStep step = decode_step(tape, params, w, live[h].state, live[h].context, ctx);
      for (std::size_t id : top_ids(step.p_final.value(), beam_size)) {
        candidates.push_back(
            Candidate{h, id, live[h].log_prob + std::log(step.p_final.value().at(id)), step});
      }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      if (a.ext_id != b.ext_id) return a.ext_id < b.ext_id;
      return a.hyp < b.hyp;
    });
    if (candidates.size() > beam_size) candidates.resize(beam_size);

    std::vector<LiveHyp> next;
    for (const Candidate& c : candidates) {
      LiveHyp hyp = live[c.hyp];
      hyp.log_prob = c.log_prob;
      hyp.steps.push_back(make_step(c.step, ctx, c.ext_id));
      hyp.state = c.step.state;
      hyp.context = c.step.context;
      if (c.ext_id == static_cast<std::size_t>(Vocabulary::kEos)) {
        pool.push_back(finish(std::move(hyp), true));
      } else {
        hyp.tokens.push_back(ctx.ext->decode(static_cast<int>(c.ext_id)));
        hyp.prev_token = static_cast<int>(c.ext_id);
        next.push_back(std::move(hyp));
      }
    }
    live = std::move(next);
  }
  for (LiveHyp& hyp : live) pool.push_back(finish(std::move(hyp), false));

  std::sort(pool.begin(), pool.end(), [](const GenerationResult& a, const GenerationResult& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return a.tokens < b.tokens;
  });
  return pool;
}

}  // namespace mhqg
