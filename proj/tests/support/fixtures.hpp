#pragma once

#include <string>
#include <vector>

#include "mhqg/annotation.hpp"
#include "mhqg/rng.hpp"

namespace mhqg::testing {

// All case-folded matches of answer_text's token sequence, document order.
inline std::vector<AnswerSpan> find_answer_spans(const AnnotatedExample& example,
                                                 const std::string& answer_text) {
  std::vector<std::string> needle;
  for (const std::string& s : tokenize_surfaces(answer_text)) needle.push_back(fold_case(s));
  std::vector<AnswerSpan> spans;
  for (std::size_t d = 0; d < example.documents.size(); ++d) {
    const auto& text = example.documents[d].text_tokens;
    if (needle.empty() || text.size() < needle.size()) continue;
    for (std::size_t i = 0; i + needle.size() <= text.size(); ++i) {
      bool ok = true;
      for (std::size_t k = 0; k < needle.size(); ++k) {
        if (fold_case(text[i + k].surface) != needle[k]) {
          ok = false;
          break;
        }
      }
      if (ok) spans.push_back(AnswerSpan{d, TokenSpan{i, i + needle.size()}});
    }
  }
  return spans;
}

// Two-document fixture about a pair of folk singers; cross-document entity
// repeats, repeated content words and an in-text answer.
inline AnnotatedExample folk_singers_example() {
  AnnotatedExample e;
  e.example_id = "folk-singers";
  e.question_type = "bridge";

  AnnotatedDocument d1;
  d1.title_tokens = fallback_annotate("Peggy Seeger");
  d1.text_tokens = fallback_annotate(
      "Margaret \"Peggy\" Seeger (born June 17, 1935) is an American folksinger. She is also "
      "well known in Britain, where she has lived for more than 30 years, and was married to "
      "the singer and songwriter Ewan MacColl until his death in 1989.");

  AnnotatedDocument d2;
  d2.title_tokens = fallback_annotate("Ewan MacColl");
  d2.text_tokens = fallback_annotate(
      "James Henry Miller (25 January 1915 - 22 October 1989), better known by his stage name "
      "Ewan MacColl, was an English folk singer, songwriter, communist, labour activist, "
      "actor, poet, playwright and record producer.");

  e.documents = {d1, d2};
  e.answer_text = "American";
  e.answer_spans = find_answer_spans(e, e.answer_text);
  e.reference_question = {"What", "nationality", "was", "James", "Henry",
                          "Miller", "'", "s", "wife", "?"};
  return e;
}

// Random annotated example with controlled mention density: entity runs,
// repeated content words, stopwords, punctuation, coreference clusters.
inline AnnotatedExample random_example(Rng& rng, std::size_t max_docs = 3) {
  static const std::vector<std::string> kWords = {"apple",  "berry", "cedar", "delta",
                                                  "ember",  "frost", "grove", "harbor",
                                                  "insula", "jetty"};
  static const std::vector<std::string> kStop = {"the", "of", "and", "a", "in", "was"};
  static const std::vector<std::string> kNames = {"Alder", "Brook", "Cavell",
                                                  "Durant", "Ellery", "Fenwick"};

  AnnotatedExample e;
  e.example_id = "rnd";
  e.question_type = "bridge";

  const std::size_t docs = 1 + rng.below(max_docs);
  for (std::size_t d = 0; d < docs; ++d) {
    AnnotatedDocument doc;
    {
      std::string title = kNames[rng.below(kNames.size())];
      if (rng.uniform() < 0.5) title += " " + kNames[rng.below(kNames.size())];
      doc.title_tokens = fallback_annotate(title);
    }
    const std::size_t len = 8 + rng.below(14);
    while (doc.text_tokens.size() < len) {
      const double roll = rng.uniform();
      if (roll < 0.55) {
        auto toks = fallback_annotate(kWords[rng.below(kWords.size())]);
        doc.text_tokens.insert(doc.text_tokens.end(), toks.begin(), toks.end());
      } else if (roll < 0.72) {
        auto toks = fallback_annotate(kStop[rng.below(kStop.size())]);
        doc.text_tokens.insert(doc.text_tokens.end(), toks.begin(), toks.end());
      } else if (roll < 0.82) {
        auto toks = fallback_annotate(rng.uniform() < 0.5 ? "," : ".");
        doc.text_tokens.insert(doc.text_tokens.end(), toks.begin(), toks.end());
      } else {
        // Entity run of one or two names, tagged explicitly.
        const std::size_t run = 1 + rng.below(2);
        for (std::size_t k = 0; k < run; ++k) {
          AnnotatedToken t;
          t.surface = kNames[rng.below(kNames.size())];
          t.lemma_or_lowercase = fold_case(t.surface);
          t.case_flag = case_flag_of(t.surface);
          t.ner_tag = "ENT";
          doc.text_tokens.push_back(std::move(t));
        }
      }
    }
    // Coreference clusters over short spans.
    const std::size_t clusters = rng.below(3);
    for (std::size_t c = 0; c < clusters; ++c) {
      std::vector<TokenSpan> spans;
      const std::size_t members = 2 + rng.below(2);
      for (std::size_t s = 0; s < members; ++s) {
        const std::size_t width = 1 + rng.below(2);
        if (doc.text_tokens.size() < width) continue;
        const std::size_t start = rng.below(doc.text_tokens.size() - width + 1);
        spans.push_back(TokenSpan{start, start + width});
      }
      if (spans.size() >= 2) doc.coref_clusters.push_back(std::move(spans));
    }
    e.documents.push_back(std::move(doc));
  }

  // Answer: a random span, its surface as answer text, all matches as spans.
  const std::size_t ad = rng.below(e.documents.size());
  const auto& text = e.documents[ad].text_tokens;
  const std::size_t width = 1 + rng.below(2);
  const std::size_t start = rng.below(text.size() - width + 1);
  std::string answer;
  for (std::size_t i = start; i < start + width; ++i) {
    if (!answer.empty()) answer.push_back(' ');
    answer += text[i].surface;
  }
  e.answer_text = answer;
  e.answer_spans = find_answer_spans(e, answer);
  e.reference_question = {"who", "is", "it", "?"};
  return e;
}

}  // namespace mhqg::testing
