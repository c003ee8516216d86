#pragma once

#include <vector>

#include "mhqg/encoder.hpp"
#include "mhqg/entity_graph.hpp"
#include "mhqg/ops.hpp"

namespace mhqg {

// One relational graph-convolution layer. Per-relation weights are composed
// from a shared basis: W_r = sum_b coeff[r,b] * basis[b].
struct RgcnLayerParams {
  std::vector<num::Parameter> basis;  // B matrices, each (d, d)
  num::Parameter coeff;               // (R, B)
  num::Parameter self_weight;         // (d, d)
};

struct ReasonerParams {
  std::vector<RgcnLayerParams> layers;
  num::Parameter agg_token_w;  // (D, (L+1)*D), token-level projection
  num::Parameter agg_doc_w;    // (D, (L+1)*D), document-level projection

  std::size_t layer_count() const { return layers.size(); }
  void collect(std::vector<num::Parameter*>& out);
};

ReasonerParams make_reasoner_params(std::size_t layer_count, std::size_t basis_count,
                                    std::size_t dim, Rng& rng, double init_range);

// Initial node states from the answer-focused token states: mean of the
// token rows covered by the node's mentions; an answer node without
// verbatim mentions falls back to the mean over all tokens.
num::Var init_node_states(num::Tape& tape, num::Var token_states, const EntityGraph& graph);

// v_i' = relu( sum_r sum_{j in N_i^r} (1/|N_i^r|) W_r v_j + W_0 v_i )
num::Var rgcn_layer(num::Tape& tape, RgcnLayerParams& params, num::Var node_states,
                    const EntityGraph& graph);

// All layer outputs, stacked for aggregation. After L layers a node has seen
// at most L-hop neighborhoods.
std::vector<num::Var> reason(num::Tape& tape, ReasonerParams& params, num::Var initial_states,
                             const EntityGraph& graph);

struct AggregateOutput {
  num::Var tokens;   // (M, D), entity-aware token representation
  num::Var summary;  // (D,), document-level vector that seeds the decoder
};

// Scatters each layer's node states back onto token positions (mean over
// covering nodes, zeros where no node covers the token), concatenates the
// layers with the token states and projects to width D; the summary vector
// concatenates the answer node's per-layer states with the final token state.
AggregateOutput aggregate(num::Tape& tape, ReasonerParams& params,
                          const std::vector<num::Var>& layer_states, num::Var token_states,
                          const EntityGraph& graph);

}  // namespace mhqg
