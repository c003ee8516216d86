#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "mhqg/annotation.hpp"

namespace mhqg {

enum class NodeKind { NAMED_ENTITY, MATCHED_WORD, TITLE, ANSWER };

enum class Relation {
  NE_MATCH,
  WORD_MATCH,
  COREF,
  TITLE_ENTITY,
  TITLE_TITLE,
  ANSWER_LINK,
};
inline constexpr std::size_t kRelationCount = 6;

const char* to_string(NodeKind k);
const char* to_string(Relation r);
NodeKind node_kind_from_string(std::string_view s);
Relation relation_from_string(std::string_view s);

// One occurrence of a node in the flat encoder sequence.
struct Mention {
  std::size_t doc = 0;
  bool in_title = false;
  TokenSpan span;  // local to the document's text or title stream
  std::size_t global_start = 0;
  std::size_t global_end = 0;

  bool operator==(const Mention&) const = default;
};

struct GraphNode {
  int node_id = 0;
  NodeKind kind = NodeKind::MATCHED_WORD;
  std::vector<Mention> mentions;  // empty only for an answer whose text never
                                  // appears verbatim (see GroundOptions)
  std::string canonical_text;     // case-folded
};

struct GraphEdge {
  int src = 0;
  int dst = 0;
  Relation relation = Relation::NE_MATCH;

  bool operator==(const GraphEdge&) const = default;
};

// Undirected typed graph; every edge is stored in both directions. Node
// ordering is stable: answer first, then titles in document order, then
// mention nodes in global offset order.
struct EntityGraph {
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;
  int answer_node_id = 0;
};

struct GroundOptions {
  // When the answer text has no verbatim span, either fail (default, the
  // corpus pipeline guarantees spans) or keep an answer node with no
  // mentions; the reasoner then initializes it from the pooled document
  // representation.
  bool allow_missing_answer_spans = false;
};

// Builds the answer-centric entity graph:
//   nodes: named-entity mentions, exactly-matched non-stop words (>=2
//   case-folded occurrences across the example's documents), one title node
//   per document, one answer node;
//   edges: NE_MATCH between identically-surfaced entity mentions,
//   WORD_MATCH between identically-surfaced word mentions, COREF within
//   each coreference cluster (spans without a node are promoted to
//   MATCHED_WORD nodes), TITLE_ENTITY from a title to every entity/word
//   node of its document, TITLE_TITLE between all titles, ANSWER_LINK from
//   the answer to every other node.
EntityGraph ground(const AnnotatedExample& example, const GroundOptions& options = {});

// Global mention spans per node, in node order. Grounding already stores
// global offsets; this recomputes them from the (doc, local) coordinates so
// the mapping can be checked and inverted independently.
std::vector<std::vector<TokenSpan>> node_spans_to_global(const AnnotatedExample& example,
                                                         const EntityGraph& graph);

// Counts per relation over undirected edges.
std::array<std::size_t, kRelationCount> relation_histogram(const EntityGraph& graph);

std::string graph_to_json(const EntityGraph& graph);
EntityGraph graph_from_json(const std::string& text);

}  // namespace mhqg
