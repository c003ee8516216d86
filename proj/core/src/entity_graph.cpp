#include "mhqg/entity_graph.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include <nlohmann/json.hpp>

namespace mhqg {

using nlohmann::json;

const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::NAMED_ENTITY: return "NAMED_ENTITY";
    case NodeKind::MATCHED_WORD: return "MATCHED_WORD";
    case NodeKind::TITLE: return "TITLE";
    case NodeKind::ANSWER: return "ANSWER";
  }
  return "MATCHED_WORD";
}

const char* to_string(Relation r) {
  switch (r) {
    case Relation::NE_MATCH: return "NE_MATCH";
    case Relation::WORD_MATCH: return "WORD_MATCH";
    case Relation::COREF: return "COREF";
    case Relation::TITLE_ENTITY: return "TITLE_ENTITY";
    case Relation::TITLE_TITLE: return "TITLE_TITLE";
    case Relation::ANSWER_LINK: return "ANSWER_LINK";
  }
  return "NE_MATCH";
}

NodeKind node_kind_from_string(std::string_view s) {
  if (s == "NAMED_ENTITY") return NodeKind::NAMED_ENTITY;
  if (s == "MATCHED_WORD") return NodeKind::MATCHED_WORD;
  if (s == "TITLE") return NodeKind::TITLE;
  if (s == "ANSWER") return NodeKind::ANSWER;
  throw DataError("unknown node kind: " + std::string(s));
}

Relation relation_from_string(std::string_view s) {
  if (s == "NE_MATCH") return Relation::NE_MATCH;
  if (s == "WORD_MATCH") return Relation::WORD_MATCH;
  if (s == "COREF") return Relation::COREF;
  if (s == "TITLE_ENTITY") return Relation::TITLE_ENTITY;
  if (s == "TITLE_TITLE") return Relation::TITLE_TITLE;
  if (s == "ANSWER_LINK") return Relation::ANSWER_LINK;
  throw DataError("unknown relation: " + std::string(s));
}

namespace {

std::string folded_join(const std::vector<AnnotatedToken>& tokens, const TokenSpan& span) {
  std::string out;
  for (std::size_t i = span.start; i < span.end; ++i) {
    if (!out.empty()) out.push_back(' ');
    out += fold_case(tokens[i].surface);
  }
  return out;
}

Mention make_mention(const GlobalOffsets& off, std::size_t doc, bool in_title, TokenSpan span) {
  Mention m;
  m.doc = doc;
  m.in_title = in_title;
  m.span = span;
  m.global_start = off.to_global(doc, in_title, span.start);
  m.global_end = off.to_global(doc, in_title, span.end - 1) + 1;
  return m;
}

struct PendingNode {
  NodeKind kind;
  Mention mention;
  std::string canonical;
};

void add_edge(std::set<std::tuple<int, int, int>>& edges, int a, int b, Relation r) {
  if (a == b) return;
  edges.emplace(std::min(a, b), std::max(a, b), static_cast<int>(r));
}

}  // namespace

EntityGraph ground(const AnnotatedExample& example, const GroundOptions& options) {
  if (example.documents.empty()) throw DataError("cannot ground a graph without documents");
  if (example.answer_spans.empty() && !options.allow_missing_answer_spans) {
    throw DataError("example " + example.example_id + " has no answer span to ground");
  }

  const GlobalOffsets off(example);

  EntityGraph graph;

  // Answer node, id 0.
  {
    GraphNode answer;
    answer.node_id = 0;
    answer.kind = NodeKind::ANSWER;
    answer.canonical_text = fold_case(example.answer_text);
    for (const AnswerSpan& a : example.answer_spans) {
      if (a.doc >= example.documents.size() || a.span.start >= a.span.end ||
          a.span.end > example.documents[a.doc].text_tokens.size()) {
        throw DataError("answer span out of range in example " + example.example_id);
      }
      answer.mentions.push_back(make_mention(off, a.doc, false, a.span));
    }
    std::sort(answer.mentions.begin(), answer.mentions.end(),
              [](const Mention& x, const Mention& y) { return x.global_start < y.global_start; });
    graph.nodes.push_back(std::move(answer));
    graph.answer_node_id = 0;
  }

  // Title nodes, document order.
  for (std::size_t d = 0; d < example.documents.size(); ++d) {
    const auto& title = example.documents[d].title_tokens;
    if (title.empty()) continue;
    GraphNode node;
    node.kind = NodeKind::TITLE;
    node.mentions.push_back(make_mention(off, d, true, TokenSpan{0, title.size()}));
    node.canonical_text = folded_join(title, TokenSpan{0, title.size()});
    node.node_id = static_cast<int>(graph.nodes.size());
    graph.nodes.push_back(std::move(node));
  }

  // Mention nodes: named-entity runs, repeated non-stop words, promoted
  // coreference spans.
  std::vector<PendingNode> pending;

  for (std::size_t d = 0; d < example.documents.size(); ++d) {
    const auto& text = example.documents[d].text_tokens;
    std::size_t i = 0;
    while (i < text.size()) {
      if (text[i].ner_tag == "NONE") {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < text.size() && text[j].ner_tag == text[i].ner_tag) ++j;
      PendingNode p;
      p.kind = NodeKind::NAMED_ENTITY;
      p.mention = make_mention(off, d, false, TokenSpan{i, j});
      p.canonical = folded_join(text, TokenSpan{i, j});
      pending.push_back(std::move(p));
      i = j;
    }
  }

  // Word nodes need a case-folded surface that occurs at least twice across
  // the documents' text; punctuation and stopwords never become nodes.
  {
    std::map<std::string, std::size_t> counts;
    for (const AnnotatedDocument& doc : example.documents) {
      for (const AnnotatedToken& t : doc.text_tokens) {
        if (t.is_stopword || is_punct_token(t.surface)) continue;
        ++counts[fold_case(t.surface)];
      }
    }
    for (std::size_t d = 0; d < example.documents.size(); ++d) {
      const auto& text = example.documents[d].text_tokens;
      for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i].is_stopword || is_punct_token(text[i].surface)) continue;
        const std::string folded = fold_case(text[i].surface);
        if (counts[folded] < 2) continue;
        PendingNode p;
        p.kind = NodeKind::MATCHED_WORD;
        p.mention = make_mention(off, d, false, TokenSpan{i, i + 1});
        p.canonical = folded;
        pending.push_back(std::move(p));
      }
    }
  }

  // Coreference spans that match no node exactly are promoted to word nodes
  // so the cluster can be linked.
  {
    std::set<std::tuple<std::size_t, std::size_t, std::size_t>> covered;  // (doc, start, end)
    for (const GraphNode& n : graph.nodes) {
      for (const Mention& m : n.mentions) {
        if (!m.in_title) covered.emplace(m.doc, m.span.start, m.span.end);
      }
    }
    for (const PendingNode& p : pending) {
      covered.emplace(p.mention.doc, p.mention.span.start, p.mention.span.end);
    }
    for (std::size_t d = 0; d < example.documents.size(); ++d) {
      const auto& doc = example.documents[d];
      for (const auto& cluster : doc.coref_clusters) {
        for (const TokenSpan& s : cluster) {
          if (s.start >= s.end || s.end > doc.text_tokens.size()) {
            throw DataError("coref span out of range in example " + example.example_id);
          }
          if (covered.count({d, s.start, s.end})) continue;
          covered.emplace(d, s.start, s.end);
          PendingNode p;
          p.kind = NodeKind::MATCHED_WORD;
          p.mention = make_mention(off, d, false, s);
          p.canonical = folded_join(doc.text_tokens, s);
          pending.push_back(std::move(p));
        }
      }
    }
  }

  std::sort(pending.begin(), pending.end(), [](const PendingNode& a, const PendingNode& b) {
    return std::tie(a.mention.global_start, a.mention.global_end, a.kind, a.canonical) <
           std::tie(b.mention.global_start, b.mention.global_end, b.kind, b.canonical);
  });
  for (PendingNode& p : pending) {
    GraphNode node;
    node.kind = p.kind;
    node.mentions.push_back(p.mention);
    node.canonical_text = std::move(p.canonical);
    node.node_id = static_cast<int>(graph.nodes.size());
    graph.nodes.push_back(std::move(node));
  }

  // Edges, collected undirected and materialized in both directions.
  std::set<std::tuple<int, int, int>> edges;

  // Exact-match relations among mention nodes of the same kind.
  {
    std::map<std::pair<int, std::string>, std::vector<int>> groups;
    for (const GraphNode& n : graph.nodes) {
      if (n.kind == NodeKind::NAMED_ENTITY || n.kind == NodeKind::MATCHED_WORD) {
        groups[{static_cast<int>(n.kind), n.canonical_text}].push_back(n.node_id);
      }
    }
    for (const auto& [key, ids] : groups) {
      const Relation rel =
          key.first == static_cast<int>(NodeKind::NAMED_ENTITY) ? Relation::NE_MATCH
                                                                : Relation::WORD_MATCH;
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = i + 1; j < ids.size(); ++j) add_edge(edges, ids[i], ids[j], rel);
    }
  }

  // Coreference clusters: link every pair of nodes representing the
  // cluster's spans.
  {
    std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::vector<int>> by_span;
    for (const GraphNode& n : graph.nodes) {
      for (const Mention& m : n.mentions) {
        if (!m.in_title) by_span[{m.doc, m.span.start, m.span.end}].push_back(n.node_id);
      }
    }
    for (std::size_t d = 0; d < example.documents.size(); ++d) {
      for (const auto& cluster : example.documents[d].coref_clusters) {
        std::set<int> members;
        for (const TokenSpan& s : cluster) {
          const auto it = by_span.find({d, s.start, s.end});
          if (it == by_span.end()) continue;
          members.insert(it->second.begin(), it->second.end());
        }
        for (auto i = members.begin(); i != members.end(); ++i) {
          for (auto j = std::next(i); j != members.end(); ++j) {
            add_edge(edges, *i, *j, Relation::COREF);
          }
        }
      }
    }
  }

  // Titles: to every entity/word node of the same document, and densely to
  // each other.
  {
    std::vector<int> title_ids;
    for (const GraphNode& n : graph.nodes) {
      if (n.kind == NodeKind::TITLE) title_ids.push_back(n.node_id);
    }
    for (int t : title_ids) {
      const std::size_t doc = graph.nodes[t].mentions.front().doc;
      for (const GraphNode& n : graph.nodes) {
        if (n.kind != NodeKind::NAMED_ENTITY && n.kind != NodeKind::MATCHED_WORD) continue;
        if (n.mentions.front().doc == doc) add_edge(edges, t, n.node_id, Relation::TITLE_ENTITY);
      }
    }
    for (std::size_t i = 0; i < title_ids.size(); ++i)
      for (std::size_t j = i + 1; j < title_ids.size(); ++j)
        add_edge(edges, title_ids[i], title_ids[j], Relation::TITLE_TITLE);
  }

  // Answer to everything.
  for (const GraphNode& n : graph.nodes) {
    if (n.node_id != graph.answer_node_id) {
      add_edge(edges, graph.answer_node_id, n.node_id, Relation::ANSWER_LINK);
    }
  }

  for (const auto& [a, b, r] : edges) {
    graph.edges.push_back(GraphEdge{a, b, static_cast<Relation>(r)});
    graph.edges.push_back(GraphEdge{b, a, static_cast<Relation>(r)});
  }
  std::sort(graph.edges.begin(), graph.edges.end(), [](const GraphEdge& x, const GraphEdge& y) {
    return std::tie(x.src, x.dst, x.relation) < std::tie(y.src, y.dst, y.relation);
  });

  return graph;
}

std::vector<std::vector<TokenSpan>> node_spans_to_global(const AnnotatedExample& example,
                                                         const EntityGraph& graph) {
  const GlobalOffsets off(example);
  std::vector<std::vector<TokenSpan>> table;
  table.reserve(graph.nodes.size());
  for (const GraphNode& n : graph.nodes) {
    std::vector<TokenSpan> spans;
    for (const Mention& m : n.mentions) {
      const std::size_t start = off.to_global(m.doc, m.in_title, m.span.start);
      const std::size_t end = off.to_global(m.doc, m.in_title, m.span.end - 1) + 1;
      spans.push_back(TokenSpan{start, end});
    }
    table.push_back(std::move(spans));
  }
  return table;
}

std::array<std::size_t, kRelationCount> relation_histogram(const EntityGraph& graph) {
  std::array<std::size_t, kRelationCount> counts{};
  for (const GraphEdge& e : graph.edges) {
    if (e.src < e.dst) ++counts[static_cast<std::size_t>(e.relation)];
  }
  return counts;
}

std::string graph_to_json(const EntityGraph& graph) {
  json nodes = json::array();
  for (const GraphNode& n : graph.nodes) {
    json mentions = json::array();
    for (const Mention& m : n.mentions) {
      mentions.push_back(json{{"doc", m.doc},
                              {"in_title", m.in_title},
                              {"start", m.span.start},
                              {"end", m.span.end},
                              {"global_start", m.global_start},
                              {"global_end", m.global_end}});
    }
    nodes.push_back(json{{"node_id", n.node_id},
                         {"kind", to_string(n.kind)},
                         {"canonical_text", n.canonical_text},
                         {"mentions", std::move(mentions)}});
  }
  json edges = json::array();
  for (const GraphEdge& e : graph.edges) {
    edges.push_back(json{{"src", e.src}, {"dst", e.dst}, {"relation", to_string(e.relation)}});
  }
  return json{{"nodes", std::move(nodes)},
              {"edges", std::move(edges)},
              {"answer_node_id", graph.answer_node_id}}
      .dump();
}

EntityGraph graph_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& ex) {
    throw DataError(std::string("malformed graph JSON: ") + ex.what());
  }
  try {
    EntityGraph g;
    for (const json& nj : j.at("nodes")) {
      GraphNode n;
      n.node_id = nj.at("node_id").get<int>();
      n.kind = node_kind_from_string(nj.at("kind").get<std::string>());
      n.canonical_text = nj.at("canonical_text").get<std::string>();
      for (const json& mj : nj.at("mentions")) {
        Mention m;
        m.doc = mj.at("doc").get<std::size_t>();
        m.in_title = mj.at("in_title").get<bool>();
        m.span = TokenSpan{mj.at("start").get<std::size_t>(), mj.at("end").get<std::size_t>()};
        m.global_start = mj.at("global_start").get<std::size_t>();
        m.global_end = mj.at("global_end").get<std::size_t>();
        n.mentions.push_back(m);
      }
      g.nodes.push_back(std::move(n));
    }
    for (const json& ej : j.at("edges")) {
      g.edges.push_back(GraphEdge{ej.at("src").get<int>(), ej.at("dst").get<int>(),
                                  relation_from_string(ej.at("relation").get<std::string>())});
    }
    g.answer_node_id = j.at("answer_node_id").get<int>();
    return g;
  } catch (const json::exception& ex) {
    throw DataError(std::string("graph JSON missing required field: ") + ex.what());
  }
}

}  // namespace mhqg
