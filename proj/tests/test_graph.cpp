#include <doctest.h>

#include <map>
#include <set>

#include "mhqg/entity_graph.hpp"
#include "support/fixtures.hpp"
#include "support/graph_oracle.hpp"

using namespace mhqg;
using mhqg::testing::folk_singers_example;
using mhqg::testing::oracle_ground;
using mhqg::testing::random_example;
using mhqg::testing::undirected_edges;

namespace {

const GraphNode* find_node(const EntityGraph& g, NodeKind kind, const std::string& canonical) {
  for (const GraphNode& n : g.nodes) {
    if (n.kind == kind && n.canonical_text == canonical) return &n;
  }
  return nullptr;
}

bool has_edge(const EntityGraph& g, int a, int b, Relation r) {
  for (const GraphEdge& e : g.edges) {
    if (e.src == a && e.dst == b && e.relation == r) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("grounding the folk-singer fixture matches the expected structure") {
  const AnnotatedExample example = folk_singers_example();
  REQUIRE(!example.answer_spans.empty());
  const EntityGraph g = ground(example);

  const GraphNode* title1 = find_node(g, NodeKind::TITLE, "peggy seeger");
  const GraphNode* title2 = find_node(g, NodeKind::TITLE, "ewan maccoll");
  REQUIRE(title1 != nullptr);
  REQUIRE(title2 != nullptr);

  // Answer node "american", linked to every other node.
  const GraphNode& answer = g.nodes[static_cast<std::size_t>(g.answer_node_id)];
  CHECK(answer.kind == NodeKind::ANSWER);
  CHECK(answer.canonical_text == "american");
  std::size_t answer_degree = 0;
  for (const GraphEdge& e : g.edges) {
    if (e.src == g.answer_node_id && e.relation == Relation::ANSWER_LINK) ++answer_degree;
  }
  CHECK(answer_degree == g.nodes.size() - 1);

  // The entity repeated across both documents is NE-matched.
  std::vector<const GraphNode*> maccolls;
  for (const GraphNode& n : g.nodes) {
    if (n.kind == NodeKind::NAMED_ENTITY && n.canonical_text == "ewan maccoll") {
      maccolls.push_back(&n);
    }
  }
  REQUIRE(maccolls.size() == 2);
  CHECK(maccolls[0]->mentions.front().doc != maccolls[1]->mentions.front().doc);
  CHECK(has_edge(g, maccolls[0]->node_id, maccolls[1]->node_id, Relation::NE_MATCH));

  // Repeated content words are word-matched across documents.
  for (const std::string& word : {std::string("singer"), std::string("songwriter")}) {
    std::vector<int> ids;
    for (const GraphNode& n : g.nodes) {
      if (n.kind == NodeKind::MATCHED_WORD && n.canonical_text == word) ids.push_back(n.node_id);
    }
    REQUIRE(ids.size() >= 2);
    CHECK(has_edge(g, ids[0], ids[1], Relation::WORD_MATCH));
  }

  CHECK(has_edge(g, title1->node_id, title2->node_id, Relation::TITLE_TITLE));
}

TEST_CASE("degenerate single-document example grounds to title and answer only") {
  AnnotatedExample e;
  e.example_id = "tiny";
  e.question_type = "bridge";
  AnnotatedDocument d;
  d.title_tokens = fallback_annotate("Lone Title");
  d.text_tokens = fallback_annotate("just some plain filler words here");
  e.documents.push_back(d);
  e.answer_text = "filler";
  e.answer_spans = mhqg::testing::find_answer_spans(e, e.answer_text);
  REQUIRE(!e.answer_spans.empty());

  const EntityGraph g = ground(e);
  REQUIRE(g.nodes.size() == 2);
  CHECK(g.nodes[0].kind == NodeKind::ANSWER);
  CHECK(g.nodes[1].kind == NodeKind::TITLE);
  REQUIRE(g.edges.size() == 2);  // one undirected link, both directions
  CHECK(g.edges[0].relation == Relation::ANSWER_LINK);
}

TEST_CASE("grounding requires an answer span unless told otherwise") {
  AnnotatedExample e;
  e.example_id = "noanswer";
  AnnotatedDocument d;
  d.title_tokens = fallback_annotate("Some Title");
  d.text_tokens = fallback_annotate("words in a row");
  e.documents.push_back(d);
  e.answer_text = "absent phrase";

  CHECK_THROWS_AS(ground(e), DataError);

  GroundOptions opt;
  opt.allow_missing_answer_spans = true;
  const EntityGraph g = ground(e, opt);
  CHECK(g.nodes[0].kind == NodeKind::ANSWER);
  CHECK(g.nodes[0].mentions.empty());
  std::size_t degree = 0;
  for (const GraphEdge& edge : g.edges) {
    if (edge.src == g.answer_node_id) ++degree;
  }
  CHECK(degree == g.nodes.size() - 1);
}

TEST_CASE("coreference spans without a node are promoted and linked") {
  AnnotatedExample e;
  e.example_id = "coref";
  e.question_type = "bridge";
  AnnotatedDocument d;
  d.title_tokens = fallback_annotate("Title Here");
  d.text_tokens = fallback_annotate("Alice Reed went home because she was tired");
  // "Alice Reed" (entity run) corefers with "she" (stopword, no node of its own).
  d.coref_clusters.push_back({TokenSpan{0, 2}, TokenSpan{5, 6}});
  e.documents.push_back(d);
  e.answer_text = "home";
  e.answer_spans = mhqg::testing::find_answer_spans(e, e.answer_text);
  REQUIRE(!e.answer_spans.empty());

  const EntityGraph g = ground(e);
  const GraphNode* she = find_node(g, NodeKind::MATCHED_WORD, "she");
  const GraphNode* alice = find_node(g, NodeKind::NAMED_ENTITY, "alice reed");
  REQUIRE(she != nullptr);
  REQUIRE(alice != nullptr);
  CHECK(has_edge(g, she->node_id, alice->node_id, Relation::COREF));
}

TEST_CASE("grounded graphs satisfy the structural invariants") {
  Rng rng(1234);
  for (int trial = 0; trial < 30; ++trial) {
    const AnnotatedExample e = random_example(rng);
    if (e.answer_spans.empty()) continue;
    const EntityGraph g = ground(e);

    // Symmetric storage, no self loops, no duplicate triples.
    std::set<std::tuple<int, int, int>> seen;
    for (const GraphEdge& edge : g.edges) {
      CHECK(edge.src != edge.dst);
      CHECK(seen.emplace(edge.src, edge.dst, static_cast<int>(edge.relation)).second);
    }
    for (const GraphEdge& edge : g.edges) {
      CHECK(seen.count({edge.dst, edge.src, static_cast<int>(edge.relation)}) == 1);
    }

    // Answer linked to every other node.
    std::size_t degree = 0;
    for (const GraphEdge& edge : g.edges) {
      if (edge.src == g.answer_node_id && edge.relation == Relation::ANSWER_LINK) ++degree;
    }
    CHECK(degree == g.nodes.size() - 1);
  }
}

TEST_CASE("grounding is deterministic") {
  Rng rng(555);
  const AnnotatedExample e = random_example(rng);
  if (e.answer_spans.empty()) return;
  CHECK(graph_to_json(ground(e)) == graph_to_json(ground(e)));
}

TEST_CASE("grounded edges equal the brute-force pairwise oracle") {
  Rng rng(20240);
  int checked = 0;
  for (int trial = 0; trial < 80 && checked < 50; ++trial) {
    const AnnotatedExample e = random_example(rng);
    if (e.answer_spans.empty()) continue;
    ++checked;

    const EntityGraph g = ground(e);
    const auto oracle = oracle_ground(e);

    REQUIRE(g.nodes.size() == oracle.nodes.size());
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      CHECK(g.nodes[i].kind == oracle.nodes[i].kind);
      CHECK(g.nodes[i].canonical_text == oracle.nodes[i].canonical);
    }
    CHECK(undirected_edges(g) == oracle.edges);
  }
  CHECK(checked == 50);
}

TEST_CASE("node spans convert to global offsets and back") {
  AnnotatedExample e;
  e.example_id = "offsets";
  e.question_type = "bridge";
  AnnotatedDocument d0, d1;
  d0.title_tokens = fallback_annotate("First Title");
  d0.text_tokens = fallback_annotate("alpha beta gamma alpha beta");
  d1.title_tokens = fallback_annotate("Second Title");
  d1.text_tokens = fallback_annotate("gamma delta Ellery Fenwick");
  e.documents = {d0, d1};
  e.answer_text = "delta";
  e.answer_spans = mhqg::testing::find_answer_spans(e, e.answer_text);
  REQUIRE(!e.answer_spans.empty());

  const EntityGraph g = ground(e);
  const auto table = node_spans_to_global(e, g);
  REQUIRE(table.size() == g.nodes.size());

  const GlobalOffsets off(e);
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    REQUIRE(table[i].size() == g.nodes[i].mentions.size());
    for (std::size_t k = 0; k < table[i].size(); ++k) {
      const Mention& m = g.nodes[i].mentions[k];
      CHECK(table[i][k].start == m.global_start);
      CHECK(table[i][k].end == m.global_end);
      // Round trip global -> local -> global.
      const auto local = off.to_local(table[i][k].start);
      CHECK(off.to_global(local.doc, local.in_title, local.local) == table[i][k].start);
      CHECK(local.doc == m.doc);
      CHECK(local.in_title == m.in_title);
      CHECK(local.local == m.span.start);
    }
  }
  // Mention at doc1 text offset 0 lands after doc0 text+title.
  const std::size_t expected = d0.text_tokens.size() + d0.title_tokens.size();
  CHECK(off.to_global(1, false, 0) == expected);
}

TEST_CASE("graph JSON round trip and relation histogram") {
  const AnnotatedExample e = folk_singers_example();
  const EntityGraph g = ground(e);
  const EntityGraph back = graph_from_json(graph_to_json(g));
  CHECK(graph_to_json(back) == graph_to_json(g));

  const auto hist = relation_histogram(g);
  CHECK(hist[static_cast<std::size_t>(Relation::ANSWER_LINK)] == g.nodes.size() - 1);
  CHECK(hist[static_cast<std::size_t>(Relation::TITLE_TITLE)] == 1);
  CHECK(hist[static_cast<std::size_t>(Relation::NE_MATCH)] >= 1);
  CHECK(hist[static_cast<std::size_t>(Relation::WORD_MATCH)] >= 2);
}
