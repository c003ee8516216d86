#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "mhqg/hotpot.hpp"
#include "mhqg/vocabulary.hpp"

using namespace mhqg;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mhqg_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Raw records in the published multi-hop format. Doc B carries three
// sentences with exactly one labeled supporting.
const char* kRawJson = R"([
  {"_id": "ex1", "type": "bridge", "question": "Who sang with Alice Blue?",
   "answer": "Carol Reed",
   "supporting_facts": [["Alpha", 0], ["Beta", 1]],
   "context": [
     ["Alpha", ["Alice Blue toured with Carol Reed in 1999 ."]],
     ["Beta", ["Filler sentence one .", "Carol Reed sang with Alice Blue .", "Filler two ."]],
     ["Gamma", ["An unrelated distractor paragraph ."]]
   ]},
  {"_id": "ex2", "type": "comparison", "question": "Which is larger, A or B?",
   "answer": "A",
   "supporting_facts": [["Alpha", 0]],
   "context": [["Alpha", ["A is larger than B ."]]]},
  {"_id": "ex3", "type": "bridge", "question": "Where was Dora Finch born?",
   "answer": "nowhere to be found",
   "supporting_facts": [["Delta", 0]],
   "context": [["Delta", ["Dora Finch was born in Quiet Valley ."]]]},
  {"_id": "ex4", "type": "bridge", "question": "malformed, no context",
   "answer": "x", "supporting_facts": [["Alpha", 0]]}
])";

}  // namespace

TEST_CASE("fallback annotator tags capitalized runs") {
  const auto tokens = fallback_annotate("Peggy Seeger sang.");
  REQUIRE(tokens.size() == 4);
  CHECK(tokens[0].surface == "Peggy");
  CHECK(tokens[1].surface == "Seeger");
  CHECK(tokens[2].surface == "sang");
  CHECK(tokens[3].surface == ".");
  // A sentence-initial multi-token run is still an entity.
  CHECK(tokens[0].ner_tag == "ENT");
  CHECK(tokens[1].ner_tag == "ENT");
  CHECK(tokens[2].ner_tag == "NONE");
  CHECK(tokens[3].ner_tag == "NONE");
}

TEST_CASE("fallback annotator leaves lone sentence-initial capitals untagged") {
  const auto tokens = fallback_annotate("The cat saw Britain today.");
  CHECK(tokens[0].ner_tag == "NONE");  // lone sentence-initial "The"
  bool found = false;
  for (const auto& t : tokens) {
    if (t.surface == "Britain") {
      found = true;
      CHECK(t.ner_tag == "ENT");
    }
  }
  CHECK(found);
}

TEST_CASE("fallback annotator marks stopwords and no entities on them") {
  const auto tokens = fallback_annotate("the the the");
  REQUIRE(tokens.size() == 3);
  for (const auto& t : tokens) {
    CHECK(t.is_stopword);
    CHECK(t.ner_tag == "NONE");
  }
}

TEST_CASE("fallback annotator on empty input") {
  CHECK(fallback_annotate("").empty());
}

TEST_CASE("fallback annotator detaches punctuation and computes case flags") {
  const auto tokens = fallback_annotate("isn't USA-made (yet)?");
  std::vector<std::string> surfaces;
  for (const auto& t : tokens) surfaces.push_back(t.surface);
  CHECK(surfaces == std::vector<std::string>{"isn", "'", "t", "USA", "-", "made", "(", "yet",
                                             ")", "?"});
  CHECK(tokens[3].case_flag == CaseFlag::ALL_UPPER);
  CHECK(tokens[5].case_flag == CaseFlag::LOWER);
  CHECK(tokens[4].case_flag == CaseFlag::OTHER);
}

TEST_CASE("ingest keeps only supporting-fact sentences and drops comparison questions") {
  const fs::path raw = temp_file("raw_ingest.json");
  std::ofstream(raw) << kRawJson;

  FallbackAnnotator annotator;
  const IngestResult result = ingest_hotpot(raw, annotator);

  CHECK(result.stats.records_read == 4);
  CHECK(result.stats.comparison_dropped == 1);
  CHECK(result.stats.answer_not_found == 1);
  CHECK(result.stats.malformed_skipped == 1);
  REQUIRE(result.examples.size() == 1);

  const AnnotatedExample& e = result.examples[0];
  CHECK(e.example_id == "ex1");
  REQUIRE(e.documents.size() == 2);  // Gamma has no supporting fact
  // Beta had 3 sentences, exactly 1 supporting: only its tokens survive.
  const AnnotatedDocument& beta = e.documents[1];
  std::string joined;
  for (const auto& t : beta.text_tokens) joined += t.surface + " ";
  CHECK(joined == "Carol Reed sang with Alice Blue . ");
  CHECK(!e.answer_spans.empty());
  validate_example(e, TagSet::default_ner(), TagSet::default_pos());
}

TEST_CASE("ingest is idempotent byte for byte") {
  const fs::path raw = temp_file("raw_idem.json");
  std::ofstream(raw) << kRawJson;
  FallbackAnnotator annotator;

  const fs::path out1 = temp_file("corpus_run1.jsonl");
  const fs::path out2 = temp_file("corpus_run2.jsonl");
  write_corpus(out1, ingest_hotpot(raw, annotator).examples);
  write_corpus(out2, ingest_hotpot(raw, annotator).examples);
  CHECK(slurp(out1) == slurp(out2));
  CHECK(!slurp(out1).empty());
}

TEST_CASE("corpus JSONL round trip preserves examples") {
  const fs::path raw = temp_file("raw_rt.json");
  std::ofstream(raw) << kRawJson;
  FallbackAnnotator annotator;
  const auto examples = ingest_hotpot(raw, annotator).examples;

  const fs::path corpus = temp_file("corpus_rt.jsonl");
  write_corpus(corpus, examples);
  const auto reread = read_corpus(corpus);
  REQUIRE(reread.size() == examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    CHECK(example_to_json(reread[i]) == example_to_json(examples[i]));
  }
}

TEST_CASE("annotated ingest validates tags against the closed sets") {
  AnnotatedExample e;
  e.example_id = "bad";
  e.question_type = "bridge";
  AnnotatedDocument d;
  AnnotatedToken t;
  t.surface = "word";
  t.lemma_or_lowercase = "word";
  t.ner_tag = "NOT_A_TAG";
  d.text_tokens.push_back(t);
  e.documents.push_back(d);
  e.answer_text = "word";
  e.answer_spans.push_back(AnswerSpan{0, TokenSpan{0, 1}});
  e.reference_question = {"what"};

  const fs::path corpus = temp_file("corpus_badtag.jsonl");
  write_corpus(corpus, {e});
  const IngestResult res =
      ingest_annotated_jsonl(corpus, TagSet::default_ner(), TagSet::default_pos());
  CHECK(res.stats.malformed_skipped == 1);
  CHECK(res.examples.empty());
}

namespace {

std::vector<AnnotatedExample> tiny_examples(std::size_t n) {
  std::vector<AnnotatedExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    AnnotatedExample e;
    e.example_id = "t" + std::to_string(i);
    e.question_type = "bridge";
    AnnotatedDocument d;
    d.text_tokens = fallback_annotate("token number " + std::to_string(i));
    e.documents.push_back(d);
    e.answer_text = "token";
    e.answer_spans.push_back(AnswerSpan{0, TokenSpan{0, 1}});
    e.reference_question = {"what", "is", "it", "?"};
    out.push_back(std::move(e));
  }
  return out;
}

std::set<std::string> ids(const std::vector<AnnotatedExample>& v) {
  std::set<std::string> s;
  for (const auto& e : v) s.insert(e.example_id);
  return s;
}

}  // namespace

TEST_CASE("split produces disjoint exhaustive partitions of the right size") {
  const auto examples = tiny_examples(10);
  const SplitResult s = split(examples, 99, {0.8, 0.1, 0.1});
  CHECK(s.train.size() == 8);
  CHECK(s.dev.size() == 1);
  CHECK(s.test.size() == 1);

  std::set<std::string> all = ids(s.train);
  for (const auto& e : s.dev) CHECK(all.insert(e.example_id).second);
  for (const auto& e : s.test) CHECK(all.insert(e.example_id).second);
  CHECK(all == ids(examples));
}

TEST_CASE("split is deterministic for a fixed seed") {
  const auto examples = tiny_examples(20);
  const SplitResult a = split(examples, 7, {0.8, 0.1, 0.1});
  const SplitResult b = split(examples, 7, {0.8, 0.1, 0.1});
  REQUIRE(a.train.size() == b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    CHECK(a.train[i].example_id == b.train[i].example_id);
  }
  CHECK(ids(a.dev) == ids(b.dev));
  CHECK(ids(a.test) == ids(b.test));
}

TEST_CASE("degenerate split ratios put everything in train") {
  const auto examples = tiny_examples(5);
  const SplitResult s = split(examples, 3, {1.0, 0.0, 0.0});
  CHECK(s.train.size() == 5);
  CHECK(s.dev.empty());
  CHECK(s.test.empty());
}

TEST_CASE("split rejects empty input and bad ratios") {
  CHECK_THROWS_AS(split({}, 1, {0.8, 0.1, 0.1}), DataError);
  CHECK_THROWS_AS(split(tiny_examples(4), 1, {0.5, 0.1, 0.1}), ConfigError);
}

TEST_CASE("split with absolute sizes") {
  const auto examples = tiny_examples(9);
  const SplitResult s = split_sizes(examples, 11, 2, 3);
  CHECK(s.train.size() == 4);
  CHECK(s.dev.size() == 2);
  CHECK(s.test.size() == 3);
}

namespace {

AnnotatedExample example_from_text(const std::string& text, const std::string& question) {
  AnnotatedExample e;
  e.example_id = "v";
  e.question_type = "bridge";
  AnnotatedDocument d;
  d.text_tokens = fallback_annotate(text);
  e.documents.push_back(d);
  e.answer_text = e.documents[0].text_tokens.empty() ? "" : e.documents[0].text_tokens[0].surface;
  if (!e.documents[0].text_tokens.empty()) {
    e.answer_spans.push_back(AnswerSpan{0, TokenSpan{0, 1}});
  }
  for (const auto& t : fallback_annotate(question)) e.reference_question.push_back(t.surface);
  return e;
}

}  // namespace

TEST_CASE("vocabulary frequency cutoff") {
  const auto e = example_from_text("a a b", "x");
  const Vocabulary v = build_vocab({e}, 100, 2);
  CHECK(v.size() == Vocabulary::kReserved + 1);
  CHECK(v.encode("a") >= Vocabulary::kReserved);
  CHECK(v.encode("b") == Vocabulary::kUnk);
}

TEST_CASE("vocabulary tie-break is lexicographic") {
  const auto e = example_from_text("c b c b", "z");
  const Vocabulary v = build_vocab({e}, 100, 1);
  CHECK(v.encode("b") < v.encode("c"));
}

TEST_CASE("vocabulary max size excludes the rarest token") {
  const auto e = example_from_text("one one one two two three", "q");
  const Vocabulary v = build_vocab({e}, Vocabulary::kReserved + 2, 1);
  // "one" (3) and "two" (2) stay; "three" and the question token "q" (1 each)
  // lose to them.
  CHECK(v.encode("one") >= Vocabulary::kReserved);
  CHECK(v.encode("two") >= Vocabulary::kReserved);
  CHECK(v.encode("three") == Vocabulary::kUnk);
}

TEST_CASE("vocabulary round trip and UNK behaviour") {
  const auto e = example_from_text("alpha beta Gamma gamma", "delta");
  const Vocabulary v = build_vocab({e}, 100, 1);
  for (const char* tok : {"alpha", "beta", "gamma", "delta"}) {
    const int id = v.encode(tok);
    CHECK(id >= Vocabulary::kReserved);
    CHECK(v.decode(id) == tok);
  }
  // Case folds before lookup; "Gamma" counted into "gamma" at build time.
  CHECK(v.encode("GAMMA") == v.encode("gamma"));
  CHECK(v.encode("never-seen") == Vocabulary::kUnk);
  CHECK(v.decode(Vocabulary::kUnk) == std::string("<unk>"));
}

TEST_CASE("vocabulary rejects bad build inputs") {
  const auto e = example_from_text("a", "b");
  CHECK_THROWS_AS(build_vocab({e}, 3, 1), ConfigError);
  CHECK_THROWS_AS(build_vocab({}, 100, 1), DataError);
}

TEST_CASE("vocabulary file round trip") {
  const auto e = example_from_text("red red green green blue", "blue ?");
  const Vocabulary v = build_vocab({e}, 100, 1);
  const fs::path path = temp_file("vocab.tsv");
  v.save(path);
  const Vocabulary loaded = Vocabulary::load(path);
  CHECK(loaded.size() == v.size());
  CHECK(loaded.digest() == v.digest());
  for (const char* tok : {"red", "green", "blue", "?"}) CHECK(loaded.encode(tok) == v.encode(tok));
}

TEST_CASE("global offsets follow text-then-title order and invert") {
  AnnotatedExample e;
  e.example_id = "off";
  AnnotatedDocument d0, d1;
  d0.text_tokens = fallback_annotate("one two three four five six seven eight nine ten");
  d0.title_tokens = fallback_annotate("T Zero");
  d1.text_tokens = fallback_annotate("next doc");
  d1.title_tokens = fallback_annotate("T One");
  e.documents = {d0, d1};

  const GlobalOffsets off(e);
  CHECK(off.to_global(1, false, 0) == 12);  // after doc0 text (10) + title (2)
  CHECK(off.to_global(0, true, 1) == 11);
  CHECK(off.total() == 16);

  for (std::size_t g = 0; g < off.total(); ++g) {
    const auto local = off.to_local(g);
    CHECK(off.to_global(local.doc, local.in_title, local.local) == g);
  }
  CHECK_THROWS_AS(off.to_global(0, false, 10), DataError);
}
