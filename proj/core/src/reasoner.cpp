#include "mhqg/reasoner.hpp"

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

}  // namespace

void ReasonerParams::collect(std::vector<num::Parameter*>& out) {
  for (RgcnLayerParams& layer : layers) {
    for (num::Parameter& b : layer.basis) out.push_back(&b);
    out.push_back(&layer.coeff);
    out.push_back(&layer.self_weight);
  }
  out.push_back(&agg_token_w);
  out.push_back(&agg_doc_w);
}

ReasonerParams make_reasoner_params(std::size_t layer_count, std::size_t basis_count,
                                    std::size_t dim, Rng& rng, double init_range) {
  if (layer_count < 1) throw ConfigError("reasoner needs at least one layer");
  if (basis_count < 1) throw ConfigError("reasoner needs at least one basis matrix");
  ReasonerParams p;
  for (std::size_t l = 0; l < layer_count; ++l) {
    RgcnLayerParams layer;
    const std::string prefix = "reasoner.layer" + std::to_string(l);
    for (std::size_t b = 0; b < basis_count; ++b) {
      layer.basis.emplace_back(prefix + ".basis" + std::to_string(b),
                               uniform_tensor({dim, dim}, rng, init_range));
    }
    layer.coeff = num::Parameter(prefix + ".coeff",
                                 uniform_tensor({kRelationCount, basis_count}, rng, init_range));
    layer.self_weight =
        num::Parameter(prefix + ".self_weight", uniform_tensor({dim, dim}, rng, init_range));
    p.layers.push_back(std::move(layer));
  }
  p.agg_token_w = num::Parameter("reasoner.agg_token_w",
                                 uniform_tensor({dim, (layer_count + 1) * dim}, rng, init_range));
  p.agg_doc_w = num::Parameter("reasoner.agg_doc_w",
                               uniform_tensor({dim, (layer_count + 1) * dim}, rng, init_range));
  return p;
}

Var init_node_states(Tape& /*tape*/, Var token_states, const EntityGraph& graph) {
  const std::size_t m = token_states.value().extent(0);
  std::vector<Var> node_rows;
  node_rows.reserve(graph.nodes.size());
  for (const GraphNode& node : graph.nodes) {
    std::vector<std::size_t> covered;
    for (const Mention& mention : node.mentions) {
      if (mention.global_end > m) {
        throw DataError("node mention outside the encoded sequence");
      }
      for (std::size_t t = mention.global_start; t < mention.global_end; ++t) covered.push_back(t);
    }
    if (covered.empty()) {
      if (node.kind != NodeKind::ANSWER) {
        throw DataError("node " + std::to_string(node.node_id) + " has no mention tokens");
      }
      // Answer never appears verbatim: pool the whole document instead.
      node_rows.push_back(num::reshape(num::mean(token_states, 0),
                                       {token_states.value().extent(1)}));
      continue;
    }
    Var gathered = num::rows(token_states, covered);
    node_rows.push_back(num::reshape(num::mean(gathered, 0), {token_states.value().extent(1)}));
  }
  return num::stack_rows(node_rows);
}

Var rgcn_layer(Tape& tape, RgcnLayerParams& params, Var node_states, const EntityGraph& graph) {
  const std::size_t n = node_states.value().extent(0);
  const std::size_t basis_count = params.basis.size();

  Var coeff = tape.leaf(params.coeff);
  Var self_w = tape.leaf(params.self_weight);
  std::vector<Var> basis;
  basis.reserve(basis_count);
  for (num::Parameter& b : params.basis) basis.push_back(tape.leaf(b));

  // Incoming edges per relation; edges are stored in both directions, so
  // reading (src -> dst) covers each neighborhood.
  std::vector<std::vector<std::size_t>> src_by_rel(kRelationCount), dst_by_rel(kRelationCount);
  for (const GraphEdge& e : graph.edges) {
    const auto r = static_cast<std::size_t>(e.relation);
    src_by_rel[r].push_back(static_cast<std::size_t>(e.src));
    dst_by_rel[r].push_back(static_cast<std::size_t>(e.dst));
  }

  Var acc = num::matmul(node_states, num::transpose(self_w));  // W_0 v_i

  for (std::size_t r = 0; r < kRelationCount; ++r) {
    if (src_by_rel[r].empty()) continue;

    // W_r from the basis.
    Var w_r{};
    for (std::size_t b = 0; b < basis_count; ++b) {
      Var c_rb = num::reshape(num::slice(num::slice(coeff, 0, r, 1), 1, b, 1), {1});
      Var term = num::scale(basis[b], c_rb);
      w_r = (b == 0) ? term : num::add(w_r, term);
    }

    Var transformed = num::matmul(num::rows(node_states, src_by_rel[r]), num::transpose(w_r));
    Var summed = num::scatter_add(transformed, dst_by_rel[r], n);

    // 1/|N_i^r|; nodes without neighbors in r received no message and keep 0.
    Tensor inv({n});
    std::vector<std::size_t> degree(n, 0);
    for (std::size_t dst : dst_by_rel[r]) ++degree[dst];
    for (std::size_t i = 0; i < n; ++i) {
      inv.at(i) = degree[i] > 0 ? 1.0 / static_cast<double>(degree[i]) : 0.0;
    }
    acc = num::add(acc, num::scale_rows(summed, tape.constant(std::move(inv))));
  }

  return num::relu(acc);
}

std::vector<Var> reason(Tape& tape, ReasonerParams& params, Var initial_states,
                        const EntityGraph& graph) {
  if (params.layers.empty()) throw ConfigError("reasoner needs at least one layer");
  std::vector<Var> outputs;
  Var states = initial_states;
  for (RgcnLayerParams& layer : params.layers) {
    states = rgcn_layer(tape, layer, states, graph);
    outputs.push_back(states);
  }
  return outputs;
}

AggregateOutput aggregate(Tape& tape, ReasonerParams& params,
                          const std::vector<Var>& layer_states, Var token_states,
                          const EntityGraph& graph) {
  const std::size_t m = token_states.value().extent(0);
  const std::size_t d = token_states.value().extent(1);
  if (layer_states.size() != params.layer_count()) {
    throw ShapeError("aggregate: layer state count does not match parameters");
  }

  // Token <- node incidence (a token may sit under several nodes; average).
  std::vector<std::size_t> inc_nodes, inc_tokens;
  std::vector<std::size_t> cover(m, 0);
  for (const GraphNode& node : graph.nodes) {
    for (const Mention& mention : node.mentions) {
      for (std::size_t t = mention.global_start; t < mention.global_end; ++t) {
        inc_nodes.push_back(static_cast<std::size_t>(node.node_id));
        inc_tokens.push_back(t);
        ++cover[t];
      }
    }
  }
  Tensor inv({m});
  for (std::size_t t = 0; t < m; ++t) {
    inv.at(t) = cover[t] > 0 ? 1.0 / static_cast<double>(cover[t]) : 0.0;
  }
  Var inv_cover = tape.constant(std::move(inv));

  std::vector<Var> blocks;
  blocks.reserve(layer_states.size() + 1);
  for (const Var& states : layer_states) {
    if (inc_nodes.empty()) {
      blocks.push_back(tape.constant(Tensor::zeros({m, d})));
      continue;
    }
    Var scattered = num::scatter_add(num::rows(states, inc_nodes), inc_tokens, m);
    blocks.push_back(num::scale_rows(scattered, inv_cover));
  }
  blocks.push_back(token_states);

  Var token_w = tape.leaf(params.agg_token_w);
  Var doc_w = tape.leaf(params.agg_doc_w);

  AggregateOutput out;
  out.tokens = num::matmul(num::concat(blocks, 1), num::transpose(token_w));  // (M, D)

  const auto answer = static_cast<std::size_t>(graph.answer_node_id);
  std::vector<Var> summary_parts;
  for (const Var& states : layer_states) {
    summary_parts.push_back(num::reshape(num::rows(states, {answer}), {d}));
  }
  summary_parts.push_back(num::reshape(num::rows(token_states, {m - 1}), {d}));
  out.summary = num::matmul(doc_w, num::concat(summary_parts, 0));  // (D,)
  return out;
}

}  // namespace mhqg
