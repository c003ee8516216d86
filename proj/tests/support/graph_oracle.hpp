#pragma once

#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "mhqg/entity_graph.hpp"

namespace mhqg::testing {

// Independent re-derivation of the grounded graph, written as plain
// quadratic loops over mention pairs straight from the edge definitions.
// Node ordering follows the same published rule (answer, titles, mentions by
// global offset) so ids are comparable with the production grounding.

struct OracleNode {
  NodeKind kind;
  std::size_t doc = 0;
  bool in_title = false;
  TokenSpan span;
  std::size_t gs = 0;
  std::size_t ge = 0;
  std::string canonical;
  std::vector<std::pair<std::size_t, TokenSpan>> answer_spans;  // answer node only
};

struct OracleGraph {
  std::vector<OracleNode> nodes;
  std::set<std::tuple<int, int, int>> edges;  // (min, max, relation)
  int answer_id = 0;
};

inline std::string oracle_fold_join(const std::vector<AnnotatedToken>& toks, TokenSpan s) {
  std::string out;
  for (std::size_t i = s.start; i < s.end; ++i) {
    if (!out.empty()) out.push_back(' ');
    out += fold_case(toks[i].surface);
  }
  return out;
}

inline OracleGraph oracle_ground(const AnnotatedExample& e) {
  const GlobalOffsets off(e);
  OracleGraph g;

  // Answer node first.
  {
    OracleNode a;
    a.kind = NodeKind::ANSWER;
    a.canonical = fold_case(e.answer_text);
    for (const AnswerSpan& s : e.answer_spans) a.answer_spans.emplace_back(s.doc, s.span);
    g.nodes.push_back(a);
  }
  // Titles in document order.
  for (std::size_t d = 0; d < e.documents.size(); ++d) {
    const auto& title = e.documents[d].title_tokens;
    if (title.empty()) continue;
    OracleNode n;
    n.kind = NodeKind::TITLE;
    n.doc = d;
    n.in_title = true;
    n.span = TokenSpan{0, title.size()};
    n.gs = off.to_global(d, true, 0);
    n.ge = n.gs + title.size();
    n.canonical = oracle_fold_join(title, n.span);
    g.nodes.push_back(n);
  }

  // Mention candidates.
  std::vector<OracleNode> mentions;
  for (std::size_t d = 0; d < e.documents.size(); ++d) {
    const auto& text = e.documents[d].text_tokens;
    // Entity runs: maximal stretches sharing one non-NONE tag.
    for (std::size_t i = 0; i < text.size();) {
      if (text[i].ner_tag == "NONE") {
        ++i;
        continue;
      }
      std::size_t j = i + 1;
      while (j < text.size() && text[j].ner_tag == text[i].ner_tag) ++j;
      OracleNode n;
      n.kind = NodeKind::NAMED_ENTITY;
      n.doc = d;
      n.span = TokenSpan{i, j};
      n.canonical = oracle_fold_join(text, n.span);
      mentions.push_back(n);
      i = j;
    }
  }
  // Word mentions: case-folded surface repeated >= 2 times over all text.
  {
    std::map<std::string, int> counts;
    for (const auto& doc : e.documents) {
      for (const auto& t : doc.text_tokens) {
        if (!t.is_stopword && !is_punct_token(t.surface)) ++counts[fold_case(t.surface)];
      }
    }
    for (std::size_t d = 0; d < e.documents.size(); ++d) {
      const auto& text = e.documents[d].text_tokens;
      for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i].is_stopword || is_punct_token(text[i].surface)) continue;
        if (counts[fold_case(text[i].surface)] < 2) continue;
        OracleNode n;
        n.kind = NodeKind::MATCHED_WORD;
        n.doc = d;
        n.span = TokenSpan{i, i + 1};
        n.canonical = fold_case(text[i].surface);
        mentions.push_back(n);
      }
    }
  }
  // Coreference spans not already a node become word nodes.
  {
    auto covered = [&](std::size_t d, TokenSpan s) {
      for (const OracleNode& n : g.nodes) {
        if (n.kind == NodeKind::ANSWER) {
          for (const auto& [ad, as] : n.answer_spans) {
            if (ad == d && as == s) return true;
          }
        } else if (!n.in_title && n.doc == d && n.span == s) {
          return true;
        }
      }
      for (const OracleNode& n : mentions) {
        if (n.doc == d && n.span == s) return true;
      }
      return false;
    };
    for (std::size_t d = 0; d < e.documents.size(); ++d) {
      for (const auto& cluster : e.documents[d].coref_clusters) {
        for (const TokenSpan& s : cluster) {
          if (covered(d, s)) continue;
          OracleNode n;
          n.kind = NodeKind::MATCHED_WORD;
          n.doc = d;
          n.span = s;
          n.canonical = oracle_fold_join(e.documents[d].text_tokens, s);
          mentions.push_back(n);
        }
      }
    }
  }
  for (OracleNode& n : mentions) {
    n.gs = off.to_global(n.doc, false, n.span.start);
    n.ge = n.gs + n.span.size();
  }
  std::sort(mentions.begin(), mentions.end(), [](const OracleNode& a, const OracleNode& b) {
    return std::tie(a.gs, a.ge, a.kind, a.canonical) < std::tie(b.gs, b.ge, b.kind, b.canonical);
  });
  for (OracleNode& n : mentions) g.nodes.push_back(std::move(n));

  // Edges by definition, every pair.
  const int n = static_cast<int>(g.nodes.size());
  auto covers_span = [&](const OracleNode& node, std::size_t d, TokenSpan s) {
    if (node.kind == NodeKind::ANSWER) {
      for (const auto& [ad, as] : node.answer_spans) {
        if (ad == d && as == s) return true;
      }
      return false;
    }
    return !node.in_title && node.doc == d && node.span == s;
  };
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const OracleNode& u = g.nodes[i];
      const OracleNode& v = g.nodes[j];
      if (u.kind == NodeKind::NAMED_ENTITY && v.kind == NodeKind::NAMED_ENTITY &&
          u.canonical == v.canonical) {
        g.edges.emplace(i, j, static_cast<int>(Relation::NE_MATCH));
      }
      if (u.kind == NodeKind::MATCHED_WORD && v.kind == NodeKind::MATCHED_WORD &&
          u.canonical == v.canonical) {
        g.edges.emplace(i, j, static_cast<int>(Relation::WORD_MATCH));
      }
      // Coreference: both nodes represent (different or same) spans of one
      // cluster.
      for (std::size_t d = 0; d < e.documents.size(); ++d) {
        for (const auto& cluster : e.documents[d].coref_clusters) {
          bool u_in = false, v_in = false;
          for (const TokenSpan& s : cluster) {
            if (covers_span(u, d, s)) u_in = true;
            if (covers_span(v, d, s)) v_in = true;
          }
          if (u_in && v_in) g.edges.emplace(i, j, static_cast<int>(Relation::COREF));
        }
      }
      const bool u_title = u.kind == NodeKind::TITLE;
      const bool v_title = v.kind == NodeKind::TITLE;
      auto is_entityish = [](const OracleNode& x) {
        return x.kind == NodeKind::NAMED_ENTITY || x.kind == NodeKind::MATCHED_WORD;
      };
      if (u_title && v_title) g.edges.emplace(i, j, static_cast<int>(Relation::TITLE_TITLE));
      if (u_title && is_entityish(v) && v.doc == u.doc) {
        g.edges.emplace(i, j, static_cast<int>(Relation::TITLE_ENTITY));
      }
      if (v_title && is_entityish(u) && u.doc == v.doc) {
        g.edges.emplace(i, j, static_cast<int>(Relation::TITLE_ENTITY));
      }
      if (u.kind == NodeKind::ANSWER || v.kind == NodeKind::ANSWER) {
        g.edges.emplace(i, j, static_cast<int>(Relation::ANSWER_LINK));
      }
    }
  }
  return g;
}

inline std::set<std::tuple<int, int, int>> undirected_edges(const EntityGraph& g) {
  std::set<std::tuple<int, int, int>> out;
  for (const GraphEdge& e : g.edges) {
    out.emplace(std::min(e.src, e.dst), std::max(e.src, e.dst), static_cast<int>(e.relation));
  }
  return out;
}

}  // namespace mhqg::testing
