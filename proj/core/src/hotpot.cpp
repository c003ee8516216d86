#include "mhqg/hotpot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "mhqg/rng.hpp"

namespace mhqg {

using nlohmann::json;

namespace {

// Answer spans: all positions where the answer's token sequence matches the
// document text after case folding.
std::vector<AnswerSpan> locate_answer(const AnnotatedExample& example,
                                      const std::vector<AnnotatedToken>& answer_tokens) {
  std::vector<AnswerSpan> spans;
  if (answer_tokens.empty()) return spans;
  std::vector<std::string> needle;
  needle.reserve(answer_tokens.size());
  for (const AnnotatedToken& t : answer_tokens) needle.push_back(t.lemma_or_lowercase);

  for (std::size_t d = 0; d < example.documents.size(); ++d) {
    const auto& text = example.documents[d].text_tokens;
    if (text.size() < needle.size()) continue;
    for (std::size_t i = 0; i + needle.size() <= text.size(); ++i) {
      bool match = true;
      for (std::size_t k = 0; k < needle.size(); ++k) {
        if (fold_case(text[i + k].surface) != needle[k]) {
          match = false;
          break;
        }
      }
      if (match) spans.push_back(AnswerSpan{d, TokenSpan{i, i + needle.size()}});
    }
  }
  return spans;
}

}  // namespace

IngestResult ingest_hotpot(const std::filesystem::path& raw_file, const Annotator& annotator) {
  std::ifstream in(raw_file, std::ios::binary);
  if (!in) throw DataError("cannot open raw dataset file: " + raw_file.string());

  json root;
  try {
    in >> root;
  } catch (const json::exception& ex) {
    throw DataError("cannot parse raw dataset file " + raw_file.string() + ": " + ex.what());
  }
  if (!root.is_array()) throw DataError("raw dataset file is not a JSON array");

  IngestResult result;
  for (const json& rec : root) {
    ++result.stats.records_read;
    try {
      const std::string type = rec.value("type", "");
      if (type == "comparison") {
        ++result.stats.comparison_dropped;
        continue;
      }

      const std::string id = rec.at("_id").get<std::string>();
      const std::string question = rec.at("question").get<std::string>();
      const std::string answer = rec.at("answer").get<std::string>();

      // Supporting-fact sentence indices per gold title.
      std::map<std::string, std::set<std::size_t>> support;
      for (const json& sf : rec.at("supporting_facts")) {
        support[sf.at(0).get<std::string>()].insert(sf.at(1).get<std::size_t>());
      }

      AnnotatedExample example;
      example.example_id = id;
      example.answer_text = answer;
      example.question_type = type;

      for (const json& ctx : rec.at("context")) {
        const std::string title = ctx.at(0).get<std::string>();
        const auto it = support.find(title);
        if (it == support.end()) continue;

        const json& sentences = ctx.at(1);
        AnnotatedDocument doc;
        doc.title_tokens = annotator.annotate(title);
        for (std::size_t s : it->second) {  // std::set keeps original sentence order
          if (s >= sentences.size()) continue;
          auto toks = annotator.annotate(sentences[s].get<std::string>());
          doc.text_tokens.insert(doc.text_tokens.end(), toks.begin(), toks.end());
        }
        if (!doc.text_tokens.empty()) example.documents.push_back(std::move(doc));
      }

      if (example.documents.empty()) {
        ++result.stats.no_supporting_facts;
        continue;
      }

      example.reference_question = {};
      for (const AnnotatedToken& t : annotator.annotate(question)) {
        example.reference_question.push_back(t.surface);
      }
      if (example.reference_question.empty()) {
        ++result.stats.malformed_skipped;
        continue;
      }

      example.answer_spans = locate_answer(example, annotator.annotate(answer));
      if (example.answer_spans.empty()) {
        ++result.stats.answer_not_found;
        continue;
      }

      ++result.stats.kept;
      result.examples.push_back(std::move(example));
    } catch (const json::exception&) {
      ++result.stats.malformed_skipped;
    }
  }
  return result;
}

IngestResult ingest_annotated_jsonl(const std::filesystem::path& file, const TagSet& ner_tags,
                                    const TagSet& pos_tags) {
  IngestResult result;
  for (AnnotatedExample& e : read_corpus(file)) {
    ++result.stats.records_read;
    if (e.question_type == "comparison") {
      ++result.stats.comparison_dropped;
      continue;
    }
    try {
      validate_example(e, ner_tags, pos_tags);
    } catch (const DataError& ex) {
      std::cerr << "warning: skipping example: " << ex.what() << "\n";
      ++result.stats.malformed_skipped;
      continue;
    }
    ++result.stats.kept;
    result.examples.push_back(std::move(e));
  }
  return result;
}

namespace {

SplitResult split_with_sizes(std::vector<AnnotatedExample> examples, std::uint64_t seed,
                             std::size_t dev_size, std::size_t test_size) {
  if (examples.empty()) throw DataError("cannot split an empty example list");
  if (dev_size + test_size > examples.size()) {
    throw ConfigError("dev+test sizes exceed the number of examples");
  }
  Rng rng(seed);
  rng.shuffle(examples);

  SplitResult out;
  const std::size_t train_size = examples.size() - dev_size - test_size;
  out.train.assign(examples.begin(), examples.begin() + train_size);
  out.dev.assign(examples.begin() + train_size, examples.begin() + train_size + dev_size);
  out.test.assign(examples.begin() + train_size + dev_size, examples.end());
  return out;
}

}  // namespace

SplitResult split(std::vector<AnnotatedExample> examples, std::uint64_t seed,
                  std::array<double, 3> ratios) {
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::fabs(sum - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  for (double r : ratios) {
    if (r < 0.0) throw ConfigError("split ratios must be non-negative");
  }
  const auto n = static_cast<double>(examples.size());
  const auto dev_size = static_cast<std::size_t>(std::floor(n * ratios[1]));
  const auto test_size = static_cast<std::size_t>(std::floor(n * ratios[2]));
  return split_with_sizes(std::move(examples), seed, dev_size, test_size);
}

SplitResult split_sizes(std::vector<AnnotatedExample> examples, std::uint64_t seed,
                        std::size_t dev_size, std::size_t test_size) {
  return split_with_sizes(std::move(examples), seed, dev_size, test_size);
}

}  // namespace mhqg
