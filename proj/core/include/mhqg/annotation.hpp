#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mhqg/common.hpp"

namespace mhqg {

enum class CaseFlag { UPPER_INITIAL, ALL_UPPER, LOWER, OTHER };

const char* to_string(CaseFlag f);
CaseFlag case_flag_from_string(std::string_view s);
CaseFlag case_flag_of(std::string_view surface);

// Closed label set for NER/POS tags. Id 0 is always NONE; remaining ids
// follow declaration order. Inputs carrying labels outside the set are
// rejected, which keeps feature embedding tables well defined.
class TagSet {
 public:
  TagSet();
  explicit TagSet(std::vector<std::string> labels);

  int id(std::string_view label) const;          // throws DataError on unknown label
  bool contains(std::string_view label) const;
  const std::string& label(std::size_t id) const { return labels_.at(id); }
  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }

  // Default closed sets: the fallback annotator's ENT plus the usual
  // en-web NER labels; UPOS for POS.
  static TagSet default_ner();
  static TagSet default_pos();

 private:
  std::vector<std::string> labels_;
};

struct AnnotatedToken {
  std::string surface;
  std::string lemma_or_lowercase;
  std::string ner_tag = "NONE";
  std::string pos_tag = "NONE";
  CaseFlag case_flag = CaseFlag::OTHER;
  bool is_stopword = false;
};

// Half-open token range [start, end).
struct TokenSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - start; }
  bool operator==(const TokenSpan&) const = default;
  auto operator<=>(const TokenSpan&) const = default;
};

struct AnnotatedDocument {
  std::vector<AnnotatedToken> title_tokens;
  std::vector<AnnotatedToken> text_tokens;
  // Each cluster holds >=2 spans over text_tokens.
  std::vector<std::vector<TokenSpan>> coref_clusters;
};

struct AnswerSpan {
  std::size_t doc = 0;
  TokenSpan span;

  bool operator==(const AnswerSpan&) const = default;
};

struct AnnotatedExample {
  std::string example_id;
  std::vector<AnnotatedDocument> documents;
  std::string answer_text;
  std::vector<AnswerSpan> answer_spans;
  std::vector<std::string> reference_question;
  std::string question_type;
};

// Pluggable token annotator.
class Annotator {
 public:
  virtual ~Annotator() = default;
  virtual std::vector<AnnotatedToken> annotate(std::string_view text) const = 0;
};

// Deterministic whitespace+punctuation tokenizer with a case-based entity
// heuristic: maximal runs of upper-initial tokens are tagged ENT, except a
// run that is a single sentence-initial token. Stopwords come from a fixed
// built-in list; no coreference output; pos_tag stays NONE.
class FallbackAnnotator : public Annotator {
 public:
  std::vector<AnnotatedToken> annotate(std::string_view text) const override;
};

std::vector<AnnotatedToken> fallback_annotate(std::string_view text);

// The annotator's raw tokenization: whitespace-separated, with every
// punctuation character detached as its own token.
std::vector<std::string> tokenize_surfaces(std::string_view text);

bool is_builtin_stopword(std::string_view folded);

// Offsets of tokens in the flat encoder sequence: per document, text tokens
// then title tokens, documents in input order.
class GlobalOffsets {
 public:
  explicit GlobalOffsets(const AnnotatedExample& example);

  std::size_t text_offset(std::size_t doc) const { return text_off_.at(doc); }
  std::size_t title_offset(std::size_t doc) const { return title_off_.at(doc); }
  std::size_t total() const { return total_; }

  std::size_t to_global(std::size_t doc, bool in_title, std::size_t local) const;

  struct Local {
    std::size_t doc = 0;
    bool in_title = false;
    std::size_t local = 0;
  };
  Local to_local(std::size_t global) const;

 private:
  std::vector<std::size_t> text_off_;
  std::vector<std::size_t> title_off_;
  std::vector<std::size_t> text_len_;
  std::vector<std::size_t> title_len_;
  std::size_t total_ = 0;
};

// Tokens of the flat encoder sequence, in GlobalOffsets order.
std::vector<const AnnotatedToken*> flat_tokens(const AnnotatedExample& example);

// Checks the structural invariants: spans in bounds, clusters >= 2 spans,
// answer spans present and case-folding to answer_text, tags inside the
// closed sets. Throws DataError.
void validate_example(const AnnotatedExample& example, const TagSet& ner_tags,
                      const TagSet& pos_tags, bool require_reference = true);

// Canonical corpus serialization: JSONL, one example per line, UTF-8.
std::string example_to_json(const AnnotatedExample& example);
AnnotatedExample example_from_json(const std::string& line);

void write_corpus(const std::filesystem::path& path,
                  const std::vector<AnnotatedExample>& examples);
std::vector<AnnotatedExample> read_corpus(const std::filesystem::path& path);

}  // namespace mhqg
