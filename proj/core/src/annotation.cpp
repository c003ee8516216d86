#include "mhqg/annotation.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace mhqg {

using nlohmann::json;

const char* to_string(CaseFlag f) {
  switch (f) {
    case CaseFlag::UPPER_INITIAL: return "UPPER_INITIAL";
    case CaseFlag::ALL_UPPER: return "ALL_UPPER";
    case CaseFlag::LOWER: return "LOWER";
    case CaseFlag::OTHER: return "OTHER";
  }
  return "OTHER";
}

CaseFlag case_flag_from_string(std::string_view s) {
  if (s == "UPPER_INITIAL") return CaseFlag::UPPER_INITIAL;
  if (s == "ALL_UPPER") return CaseFlag::ALL_UPPER;
  if (s == "LOWER") return CaseFlag::LOWER;
  if (s == "OTHER") return CaseFlag::OTHER;
  throw DataError("unknown case flag: " + std::string(s));
}

CaseFlag case_flag_of(std::string_view surface) {
  std::size_t alpha = 0, upper = 0, lower = 0;
  for (unsigned char c : surface) {
    if (std::isalpha(c)) {
      ++alpha;
      if (std::isupper(c)) ++upper;
      else ++lower;
    }
  }
  if (alpha == 0) return CaseFlag::OTHER;
  if (upper == alpha && alpha >= 2) return CaseFlag::ALL_UPPER;
  if (!surface.empty() && std::isupper(static_cast<unsigned char>(surface.front()))) {
    return CaseFlag::UPPER_INITIAL;
  }
  if (lower == alpha) return CaseFlag::LOWER;
  return CaseFlag::OTHER;
}

TagSet::TagSet() : labels_{"NONE"} {}

TagSet::TagSet(std::vector<std::string> labels) {
  labels_.push_back("NONE");
  for (std::string& l : labels) {
    if (l == "NONE") continue;
    if (contains(l)) throw ConfigError("duplicate tag label: " + l);
    labels_.push_back(std::move(l));
  }
}

int TagSet::id(std::string_view label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) return static_cast<int>(i);
  }
  throw DataError("tag label outside the declared closed set: " + std::string(label));
}

bool TagSet::contains(std::string_view label) const {
  return std::any_of(labels_.begin(), labels_.end(),
                     [&](const std::string& l) { return l == label; });
}

TagSet TagSet::default_ner() {
  return TagSet({"ENT", "PERSON", "NORP", "FAC", "ORG", "GPE", "LOC", "PRODUCT", "EVENT",
                 "WORK_OF_ART", "LAW", "LANGUAGE", "DATE", "TIME", "PERCENT", "MONEY",
                 "QUANTITY", "ORDINAL", "CARDINAL"});
}

TagSet TagSet::default_pos() {
  return TagSet({"ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM", "PART",
                 "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X"});
}

namespace {

const std::unordered_set<std::string>& stopword_set() {
  static const std::unordered_set<std::string> kStopwords = {
      "a",       "about",  "above",  "after",   "again",   "against", "all",     "am",
      "an",      "and",    "any",    "are",     "as",      "at",      "be",      "because",
      "been",    "before", "being",  "below",   "between", "both",    "but",     "by",
      "can",     "could",  "did",    "do",      "does",    "doing",   "down",    "during",
      "each",    "few",    "for",    "from",    "further", "had",     "has",     "have",
      "having",  "he",     "her",    "here",    "hers",    "herself", "him",     "himself",
      "his",     "how",    "i",      "if",      "in",      "into",    "is",      "it",
      "its",     "itself", "just",   "me",      "more",    "most",    "my",      "myself",
      "no",      "nor",    "not",    "now",     "of",      "off",     "on",      "once",
      "only",    "or",     "other",  "our",     "ours",    "ourselves", "out",   "over",
      "own",     "s",      "same",   "she",     "should",  "so",      "some",    "such",
      "t",       "than",   "that",   "the",     "their",   "theirs",  "them",    "themselves",
      "then",    "there",  "these",  "they",    "this",    "those",   "through", "to",
      "too",     "under",  "until",  "up",      "very",    "was",     "we",      "were",
      "what",    "when",   "where",  "which",   "while",   "who",     "whom",    "why",
      "will",    "with",   "you",    "your",    "yours",   "yourself", "yourselves"};
  return kStopwords;
}

bool is_word_char(unsigned char c) {
  // Bytes >= 0x80 are UTF-8 continuation/lead bytes and stay inside words.
  return std::isalnum(c) || c >= 0x80;
}

std::vector<std::string> split_surfaces(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      if (!cur.empty()) {
        out.push_back(cur);
        cur.clear();
      }
    } else if (is_word_char(c)) {
      cur.push_back(static_cast<char>(c));
    } else {
      if (!cur.empty()) {
        out.push_back(cur);
        cur.clear();
      }
      out.emplace_back(1, static_cast<char>(c));
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

bool is_sentence_end(const std::string& tok) {
  return tok == "." || tok == "!" || tok == "?";
}

}  // namespace

bool is_builtin_stopword(std::string_view folded) {
  return stopword_set().count(std::string(folded)) > 0;
}

std::vector<std::string> tokenize_surfaces(std::string_view text) { return split_surfaces(text); }

std::vector<AnnotatedToken> FallbackAnnotator::annotate(std::string_view text) const {
  const std::vector<std::string> surfaces = split_surfaces(text);
  std::vector<AnnotatedToken> tokens;
  tokens.reserve(surfaces.size());

  std::vector<bool> sentence_start(surfaces.size(), false);
  for (std::size_t i = 0; i < surfaces.size(); ++i) {
    sentence_start[i] = (i == 0) || is_sentence_end(surfaces[i - 1]);
  }

  for (const std::string& s : surfaces) {
    AnnotatedToken tok;
    tok.surface = s;
    tok.lemma_or_lowercase = fold_case(s);
    tok.case_flag = case_flag_of(s);
    tok.is_stopword = is_builtin_stopword(tok.lemma_or_lowercase);
    tokens.push_back(std::move(tok));
  }

  // Entity heuristic: maximal runs of upper-initial tokens; a lone
  // sentence-initial capitalized token stays untagged.
  std::size_t i = 0;
  while (i < tokens.size()) {
    if (!starts_upper(tokens[i].surface)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < tokens.size() && starts_upper(tokens[j].surface)) ++j;
    const bool lone_sentence_start = (j - i == 1) && sentence_start[i];
    if (!lone_sentence_start) {
      for (std::size_t k = i; k < j; ++k) tokens[k].ner_tag = "ENT";
    }
    i = j;
  }
  return tokens;
}

std::vector<AnnotatedToken> fallback_annotate(std::string_view text) {
  return FallbackAnnotator{}.annotate(text);
}

GlobalOffsets::GlobalOffsets(const AnnotatedExample& example) {
  std::size_t off = 0;
  for (const AnnotatedDocument& doc : example.documents) {
    text_off_.push_back(off);
    text_len_.push_back(doc.text_tokens.size());
    off += doc.text_tokens.size();
    title_off_.push_back(off);
    title_len_.push_back(doc.title_tokens.size());
    off += doc.title_tokens.size();
  }
  total_ = off;
}

std::size_t GlobalOffsets::to_global(std::size_t doc, bool in_title, std::size_t local) const {
  if (doc >= text_off_.size()) throw DataError("document index out of range");
  const std::size_t len = in_title ? title_len_[doc] : text_len_[doc];
  if (local >= len) {
    throw DataError("token offset " + std::to_string(local) + " out of range for document " +
                    std::to_string(doc));
  }
  return (in_title ? title_off_[doc] : text_off_[doc]) + local;
}

GlobalOffsets::Local GlobalOffsets::to_local(std::size_t global) const {
  if (global >= total_) throw DataError("global token offset out of range");
  for (std::size_t d = text_off_.size(); d-- > 0;) {
    if (global >= title_off_[d]) return Local{d, true, global - title_off_[d]};
    if (global >= text_off_[d]) return Local{d, false, global - text_off_[d]};
  }
  throw DataError("global token offset out of range");
}

std::vector<const AnnotatedToken*> flat_tokens(const AnnotatedExample& example) {
  std::vector<const AnnotatedToken*> out;
  for (const AnnotatedDocument& doc : example.documents) {
    for (const AnnotatedToken& t : doc.text_tokens) out.push_back(&t);
    for (const AnnotatedToken& t : doc.title_tokens) out.push_back(&t);
  }
  return out;
}

namespace {

void validate_token(const AnnotatedToken& tok, const TagSet& ner_tags, const TagSet& pos_tags) {
  if (tok.surface.empty()) throw DataError("token with empty surface");
  if (!ner_tags.contains(tok.ner_tag)) {
    throw DataError("ner tag outside the declared closed set: " + tok.ner_tag);
  }
  if (!pos_tags.contains(tok.pos_tag)) {
    throw DataError("pos tag outside the declared closed set: " + tok.pos_tag);
  }
}

}  // namespace

void validate_example(const AnnotatedExample& example, const TagSet& ner_tags,
                      const TagSet& pos_tags, bool require_reference) {
  if (example.documents.empty()) {
    throw DataError("example " + example.example_id + " has no documents");
  }
  for (const AnnotatedDocument& doc : example.documents) {
    for (const AnnotatedToken& t : doc.title_tokens) validate_token(t, ner_tags, pos_tags);
    for (const AnnotatedToken& t : doc.text_tokens) validate_token(t, ner_tags, pos_tags);
    for (const auto& cluster : doc.coref_clusters) {
      if (cluster.size() < 2) {
        throw DataError("example " + example.example_id + ": coref cluster with < 2 spans");
      }
      for (const TokenSpan& s : cluster) {
        if (s.start >= s.end || s.end > doc.text_tokens.size()) {
          throw DataError("example " + example.example_id + ": coref span out of bounds");
        }
      }
    }
  }
  if (example.answer_spans.empty()) {
    throw DataError("example " + example.example_id + " has no answer span");
  }
  const std::string folded_answer = fold_case(example.answer_text);
  for (const AnswerSpan& a : example.answer_spans) {
    if (a.doc >= example.documents.size()) {
      throw DataError("example " + example.example_id + ": answer span document out of range");
    }
    const auto& text = example.documents[a.doc].text_tokens;
    if (a.span.start >= a.span.end || a.span.end > text.size()) {
      throw DataError("example " + example.example_id + ": answer span out of bounds");
    }
    std::string joined;
    for (std::size_t i = a.span.start; i < a.span.end; ++i) {
      if (!joined.empty()) joined.push_back(' ');
      joined += fold_case(text[i].surface);
    }
    if (joined != folded_answer) {
      throw DataError("example " + example.example_id + ": answer span text '" + joined +
                      "' does not case-fold to answer '" + folded_answer + "'");
    }
  }
  if (require_reference && example.reference_question.empty()) {
    throw DataError("example " + example.example_id + " has an empty reference question");
  }
}

namespace {

json token_to_json(const AnnotatedToken& t) {
  return json{{"surface", t.surface},
              {"lemma_or_lowercase", t.lemma_or_lowercase},
              {"ner_tag", t.ner_tag},
              {"pos_tag", t.pos_tag},
              {"case_flag", to_string(t.case_flag)},
              {"is_stopword", t.is_stopword}};
}

AnnotatedToken token_from_json(const json& j) {
  AnnotatedToken t;
  t.surface = j.at("surface").get<std::string>();
  t.lemma_or_lowercase = j.at("lemma_or_lowercase").get<std::string>();
  t.ner_tag = j.at("ner_tag").get<std::string>();
  t.pos_tag = j.at("pos_tag").get<std::string>();
  t.case_flag = case_flag_from_string(j.at("case_flag").get<std::string>());
  t.is_stopword = j.at("is_stopword").get<bool>();
  return t;
}

json span_to_json(const TokenSpan& s) { return json{{"start", s.start}, {"end", s.end}}; }

TokenSpan span_from_json(const json& j) {
  return TokenSpan{j.at("start").get<std::size_t>(), j.at("end").get<std::size_t>()};
}

}  // namespace

std::string example_to_json(const AnnotatedExample& e) {
  json docs = json::array();
  for (const AnnotatedDocument& d : e.documents) {
    json title = json::array(), text = json::array(), clusters = json::array();
    for (const AnnotatedToken& t : d.title_tokens) title.push_back(token_to_json(t));
    for (const AnnotatedToken& t : d.text_tokens) text.push_back(token_to_json(t));
    for (const auto& cluster : d.coref_clusters) {
      json c = json::array();
      for (const TokenSpan& s : cluster) c.push_back(span_to_json(s));
      clusters.push_back(std::move(c));
    }
    docs.push_back(json{{"title_tokens", std::move(title)},
                        {"text_tokens", std::move(text)},
                        {"coref_clusters", std::move(clusters)}});
  }
  json spans = json::array();
  for (const AnswerSpan& a : e.answer_spans) {
    spans.push_back(json{{"doc", a.doc}, {"start", a.span.start}, {"end", a.span.end}});
  }
  json j{{"example_id", e.example_id},
         {"documents", std::move(docs)},
         {"answer_text", e.answer_text},
         {"answer_spans", std::move(spans)},
         {"reference_question", e.reference_question},
         {"question_type", e.question_type}};
  return j.dump();
}

AnnotatedExample example_from_json(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& ex) {
    throw DataError(std::string("malformed corpus line: ") + ex.what());
  }
  try {
    AnnotatedExample e;
    e.example_id = j.at("example_id").get<std::string>();
    for (const json& dj : j.at("documents")) {
      AnnotatedDocument d;
      for (const json& tj : dj.at("title_tokens")) d.title_tokens.push_back(token_from_json(tj));
      for (const json& tj : dj.at("text_tokens")) d.text_tokens.push_back(token_from_json(tj));
      for (const json& cj : dj.at("coref_clusters")) {
        std::vector<TokenSpan> cluster;
        for (const json& sj : cj) cluster.push_back(span_from_json(sj));
        d.coref_clusters.push_back(std::move(cluster));
      }
      e.documents.push_back(std::move(d));
    }
    e.answer_text = j.at("answer_text").get<std::string>();
    for (const json& aj : j.at("answer_spans")) {
      AnswerSpan a;
      a.doc = aj.at("doc").get<std::size_t>();
      a.span = TokenSpan{aj.at("start").get<std::size_t>(), aj.at("end").get<std::size_t>()};
      e.answer_spans.push_back(a);
    }
    e.reference_question = j.at("reference_question").get<std::vector<std::string>>();
    e.question_type = j.at("question_type").get<std::string>();
    return e;
  } catch (const json::exception& ex) {
    throw DataError(std::string("corpus line missing required field: ") + ex.what());
  }
}

void write_corpus(const std::filesystem::path& path,
                  const std::vector<AnnotatedExample>& examples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open corpus file for writing: " + path.string());
  for (const AnnotatedExample& e : examples) {
    out << example_to_json(e) << "\n";
  }
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<AnnotatedExample> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus file: " + path.string());
  std::vector<AnnotatedExample> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(example_from_json(line));
  }
  return out;
}

}  // namespace mhqg
