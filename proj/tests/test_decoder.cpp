#include <doctest.h>

#include <cmath>

#include "mhqg/adam.hpp"
#include "mhqg/common.hpp"
#include "mhqg/decoder.hpp"
#include "mhqg/gradcheck.hpp"
#include "mhqg/model.hpp"
#include "support/fixtures.hpp"
#include "support/micro_model.hpp"

using namespace mhqg;
using num::Parameter;
using num::Tape;
using num::Tensor;
using num::Var;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double range = 0.5) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = rng.uniform(-range, range);
  return t;
}

Vocabulary make_vocab(const std::string& text) {
  AnnotatedExample e;
  e.example_id = "vocab";
  AnnotatedDocument d;
  d.text_tokens = fallback_annotate(text);
  e.documents.push_back(d);
  e.reference_question = {"?"};
  return Vocabulary::build({e}, 100, 1);
}

struct StepFixture {
  Vocabulary vocab;
  ExtendedVocab ext;
  DecoderParams params;
  Parameter word_emb;
  std::vector<std::string> source;
  DecodeContext ctx;  // valid while the tape passed to make() lives
  std::size_t hidden;

  StepFixture(Tape& tape, Rng& rng, const std::string& vocab_text,
              const std::vector<std::string>& source_tokens, std::size_t hidden_dim = 6,
              std::size_t word_dim = 4)
      : vocab(make_vocab(vocab_text)),
        ext(ExtendedVocab::build(vocab, source_tokens)),
        params(make_decoder_params(word_dim, hidden_dim, vocab.size(), rng, 0.4)),
        word_emb("embed.word", random_tensor({vocab.size(), word_dim}, rng)),
        source(source_tokens),
        hidden(hidden_dim) {
    const std::size_t m = source.size();
    ctx.memory = tape.constant(random_tensor({m, hidden_dim}, rng, 1.0));
    ctx.memory_t = num::transpose(ctx.memory);
    ctx.summary = tape.constant(random_tensor({hidden_dim}, rng, 1.0));
    for (const std::string& tok : source) {
      ctx.source_ext_ids.push_back(static_cast<std::size_t>(ext.encode(fold_case(tok))));
    }
    ctx.ext = &ext;
  }

  DecodeStep step(Tape& tape, int prev_token = Vocabulary::kBos) {
    Var w = num::reshape(num::rows(tape.leaf(word_emb),
                                   {static_cast<std::size_t>(
                                       prev_token < static_cast<int>(vocab.size())
                                           ? prev_token
                                           : Vocabulary::kUnk)}),
                         {word_emb.value.extent(1)});
    LstmState prev{ctx.summary, tape.constant(Tensor::zeros({hidden}))};
    return decode_step(tape, params, w, prev, tape.constant(Tensor::zeros({hidden})), ctx);
  }
};

}  // namespace

TEST_CASE("extended vocabulary assigns stable ids to source-only tokens") {
  const Vocabulary vocab = make_vocab("alpha beta gamma");
  const std::vector<std::string> source = {"alpha", "zeta", "beta", "zeta", "theta"};
  const ExtendedVocab ext = ExtendedVocab::build(vocab, source);

  CHECK(ext.base_size() == vocab.size());
  CHECK(ext.size() == vocab.size() + 2);  // zeta, theta
  const int zeta = ext.encode("zeta");
  const int theta = ext.encode("theta");
  CHECK(ext.is_extended(zeta));
  CHECK(ext.is_extended(theta));
  CHECK(zeta < theta);  // first-occurrence order
  CHECK(ext.decode(zeta) == "zeta");
  CHECK(ext.encode("alpha") == vocab.encode("alpha"));
  CHECK_FALSE(ext.is_extended(ext.encode("alpha")));
  CHECK(ext.encode("never") == Vocabulary::kUnk);
}

TEST_CASE("decode step produces a probability distribution over the extended vocabulary") {
  Rng rng(100);
  for (int trial = 0; trial < 50; ++trial) {
    Tape tape;
    StepFixture fx(tape, rng, "red green blue yellow",
                   {"red", "copper", "green", "copper", "slate"});
    DecodeStep step = fx.step(tape);

    const Tensor& p = step.p_final.value();
    REQUIRE(p.size() == fx.ext.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      CHECK(p.at(i) >= 0.0);
      sum += p.at(i);
    }
    CHECK(std::fabs(sum - 1.0) < 1e-6);

    const Tensor& attn = step.attention.value();
    double asum = 0.0;
    for (std::size_t i = 0; i < attn.size(); ++i) asum += attn.at(i);
    CHECK(std::fabs(asum - 1.0) < 1e-9);

    const double gate = step.copy_gate.value().at(0);
    CHECK(gate > 0.0);
    CHECK(gate < 1.0);
  }
}

TEST_CASE("zero copy-gate preimage mixes both paths equally") {
  Rng rng(101);
  Tape tape;
  StepFixture fx(tape, rng, "red green blue", {"red", "copper", "green"});
  fx.params.copy_w_state.value.fill(0.0);
  fx.params.copy_w_ctx.value.fill(0.0);
  fx.params.copy_bias.value.fill(0.0);

  DecodeStep step = fx.step(tape);
  CHECK(step.copy_gate.value().at(0) == doctest::Approx(0.5));

  // p_final = 0.5 * scattered attention + 0.5 * padded generate.
  const Tensor& attn = step.attention.value();
  std::vector<double> copy_mass(fx.ext.size(), 0.0);
  for (std::size_t pos = 0; pos < fx.ctx.source_ext_ids.size(); ++pos) {
    copy_mass[fx.ctx.source_ext_ids[pos]] += attn.at(pos);
  }
  // Recover p_generate by re-running the output layer pieces through values.
  for (std::size_t id = fx.ext.base_size(); id < fx.ext.size(); ++id) {
    CHECK(step.p_final.value().at(id) == doctest::Approx(0.5 * copy_mass[id]).epsilon(1e-12));
  }
}

TEST_CASE("source-only tokens receive mass exclusively through copying") {
  Rng rng(102);
  Tape tape;
  StepFixture fx(tape, rng, "red green blue", {"red", "maccoll", "green", "maccoll"});
  DecodeStep step = fx.step(tape);

  const int ext_id = fx.ext.encode("maccoll");
  REQUIRE(fx.ext.is_extended(ext_id));

  const double gate = step.copy_gate.value().at(0);
  const Tensor& attn = step.attention.value();
  double copy_mass = 0.0;
  for (std::size_t pos = 0; pos < fx.source.size(); ++pos) {
    if (fx.ctx.source_ext_ids[pos] == static_cast<std::size_t>(ext_id)) {
      copy_mass += attn.at(pos);
    }
  }
  CHECK(step.p_final.value().at(static_cast<std::size_t>(ext_id)) ==
        doctest::Approx(gate * copy_mass).epsilon(1e-12));
}

TEST_CASE("repeated source tokens pool their attention into one copy mass") {
  Rng rng(103);
  Tape tape;
  StepFixture fx(tape, rng, "red green blue the", {"the", "red", "green", "the", "blue"});
  DecodeStep step = fx.step(tape);

  const auto the_id = static_cast<std::size_t>(fx.ext.encode("the"));
  const Tensor& attn = step.attention.value();
  const double expected = attn.at(0) + attn.at(3);

  // Isolate the copy share: p_final(the) = gate*copy + (1-gate)*p_gen(the).
  const double gate = step.copy_gate.value().at(0);
  std::vector<double> copy_mass(fx.ext.size(), 0.0);
  for (std::size_t pos = 0; pos < fx.source.size(); ++pos) {
    copy_mass[fx.ctx.source_ext_ids[pos]] += attn.at(pos);
  }
  CHECK(copy_mass[the_id] == doctest::Approx(expected).epsilon(1e-12));
  CHECK(step.p_final.value().at(the_id) >= gate * expected - 1e-12);
}

TEST_CASE("teacher forcing matches a manual step-by-step recomputation") {
  Rng rng(104);
  Tape tape;
  StepFixture fx(tape, rng, "red green blue what is", {"red", "copper", "green"});
  const std::vector<int> refs = {fx.ext.encode("what"), fx.ext.encode("copper"),
                                 fx.ext.encode("red")};

  Var nll = teacher_forced_nll(tape, fx.params, fx.word_emb, fx.ctx, refs);

  // Manual recomputation with decode_step.
  std::vector<int> targets = refs;
  targets.push_back(Vocabulary::kEos);
  LstmState state{fx.ctx.summary, tape.constant(Tensor::zeros({fx.hidden}))};
  Var context = tape.constant(Tensor::zeros({fx.hidden}));
  int prev = Vocabulary::kBos;
  double total = 0.0;
  for (int target : targets) {
    const std::size_t row = fx.ext.is_extended(prev) ? Vocabulary::kUnk
                                                     : static_cast<std::size_t>(prev);
    Var w = num::reshape(num::rows(tape.leaf(fx.word_emb), {row}),
                         {fx.word_emb.value.extent(1)});
    DecodeStep step = decode_step(tape, fx.params, w, state, context, fx.ctx);
    total -= std::log(step.p_final.value().at(static_cast<std::size_t>(target)));
    state = step.state;
    context = step.context;
    prev = target;
  }
  CHECK(nll.value().at(0) == doctest::Approx(total / static_cast<double>(targets.size())));
  CHECK(nll.value().at(0) > 0.0);
}

TEST_CASE("teacher forcing rejects an empty reference") {
  Rng rng(105);
  Tape tape;
  StepFixture fx(tape, rng, "red green", {"red"});
  CHECK_THROWS_AS(teacher_forced_nll(tape, fx.params, fx.word_emb, fx.ctx, {}), DataError);
}

TEST_CASE("gradients flow through one teacher-forced decode step") {
  Rng rng(106);
  Tape dummy;
  StepFixture fx(dummy, rng, "red green blue", {"red", "copper"});
  const std::vector<int> refs = {fx.ext.encode("green")};

  // Memory and summary become parameters so the whole step is exercised.
  Parameter memory("memory", random_tensor({2, fx.hidden}, rng, 1.0));
  Parameter summary("summary", random_tensor({fx.hidden}, rng, 1.0));

  std::vector<Parameter*> params = {&memory, &summary, &fx.word_emb};
  fx.params.collect(params);

  auto closure = [&](Tape& tape) {
    DecodeContext ctx;
    ctx.memory = tape.leaf(memory);
    ctx.memory_t = num::transpose(ctx.memory);
    ctx.summary = tape.leaf(summary);
    ctx.source_ext_ids = fx.ctx.source_ext_ids;
    ctx.ext = &fx.ext;
    return teacher_forced_nll(tape, fx.params, fx.word_emb, ctx, refs);
  };
  const auto report = num::finite_difference_check(closure, params, 1e-5, 1e-4);
  INFO(report.summary());
  CHECK(report.passed());
}

namespace {

// Featurized micro example over a freshly built vocabulary; the vocabulary
// cap forces a few source tokens into the extended range.
struct MicroPipeline {
  std::vector<AnnotatedExample> corpus;
  Vocabulary vocab;
  Featurizer featurizer;
  ModelExample example;

  explicit MicroPipeline(Rng& rng, std::size_t vocab_cap = 28)
      : corpus({mhqg::testing::random_example(rng)}),
        vocab(Vocabulary::build(corpus, vocab_cap, 1)),
        featurizer(vocab, TagSet::default_ner(), TagSet::default_pos(), 384),
        example(featurizer.featurize(corpus.front())) {}
};

}  // namespace

TEST_CASE("beam size one reproduces greedy decoding") {
  Rng rng(201);
  int done = 0;
  for (int trial = 0; trial < 40 && done < 20; ++trial) {
    std::vector<AnnotatedExample> corpus = {mhqg::testing::random_example(rng)};
    if (corpus[0].answer_spans.empty()) continue;
    ++done;
    MicroPipeline* pipe = nullptr;
    Vocabulary vocab = Vocabulary::build(corpus, 28, 1);
    Featurizer fz(vocab, TagSet::default_ner(), TagSet::default_pos(), 384);
    ModelExample ex = fz.featurize(corpus[0]);
    (void)pipe;

    ModelConfig mc = mhqg::testing::micro_config(vocab.size());
    mc.ner_count = TagSet::default_ner().size();
    mc.pos_count = TagSet::default_pos().size();
    QgModel model(mc, /*seed=*/1000 + static_cast<std::uint64_t>(trial));

    Tape t1, t2;
    const GenerationResult greedy = model.greedy(t1, ex, 12);
    const auto beams = model.beam(t2, ex, 1, 12);
    REQUIRE(!beams.empty());
    CHECK(beams.front().tokens == greedy.tokens);
    CHECK(beams.front().log_prob == doctest::Approx(greedy.log_prob));
  }
  CHECK(done == 20);
}

TEST_CASE("beam five finds a hypothesis at least as good as greedy") {
  Rng rng(202);
  int done = 0;
  for (int trial = 0; trial < 40 && done < 20; ++trial) {
    std::vector<AnnotatedExample> corpus = {mhqg::testing::random_example(rng)};
    if (corpus[0].answer_spans.empty()) continue;
    ++done;
    Vocabulary vocab = Vocabulary::build(corpus, 28, 1);
    Featurizer fz(vocab, TagSet::default_ner(), TagSet::default_pos(), 384);
    ModelExample ex = fz.featurize(corpus[0]);

    ModelConfig mc = mhqg::testing::micro_config(vocab.size());
    mc.ner_count = TagSet::default_ner().size();
    mc.pos_count = TagSet::default_pos().size();
    QgModel model(mc, 2000 + static_cast<std::uint64_t>(trial));

    Tape t1, t2;
    const GenerationResult greedy = model.greedy(t1, ex, 10);
    const auto beams = model.beam(t2, ex, 5, 10);
    double best_unnormalized = -1e300;
    for (const auto& b : beams) best_unnormalized = std::max(best_unnormalized, b.log_prob);
    CHECK(best_unnormalized >= greedy.log_prob - 1e-9);
  }
  CHECK(done == 20);
}

TEST_CASE("a model that always emits EOS returns an empty sequence") {
  Rng rng(203);
  Tape tape;
  StepFixture fx(tape, rng, "red green blue", {"red", "copper"});
  fx.params.copy_bias.value.at(0) = -50.0;  // gate ~ 0
  fx.params.out_w.value.fill(0.0);
  fx.params.out_b.value.fill(0.0);
  fx.params.out_b.value.at(Vocabulary::kEos) = 50.0;

  const GenerationResult out = greedy_decode(tape, fx.params, fx.word_emb, fx.ctx, 8);
  CHECK(out.tokens.empty());
  CHECK(out.ended_with_eos);
  REQUIRE(out.steps.size() == 1);
  CHECK(out.steps[0].token == "</s>");

  Tape tape2;
  StepFixture fx2(tape2, rng, "red green blue", {"red", "copper"});
  fx2.params = fx.params;
  const auto beams = beam_search(tape2, fx2.params, fx2.word_emb, fx2.ctx, 1, 8);
  REQUIRE(beams.size() == 1);
  CHECK(beams.front().tokens.empty());
}

TEST_CASE("emitted out-of-vocabulary tokens carry copy provenance") {
  Rng rng(204);
  int found = 0;
  for (int trial = 0; trial < 60 && found == 0; ++trial) {
    std::vector<AnnotatedExample> corpus = {mhqg::testing::random_example(rng)};
    if (corpus[0].answer_spans.empty()) continue;
    Vocabulary vocab = Vocabulary::build(corpus, 20, 1);  // tight cap, many extended
    Featurizer fz(vocab, TagSet::default_ner(), TagSet::default_pos(), 384);
    ModelExample ex = fz.featurize(corpus[0]);

    ModelConfig mc = mhqg::testing::micro_config(vocab.size());
    mc.ner_count = TagSet::default_ner().size();
    mc.pos_count = TagSet::default_pos().size();
    QgModel model(mc, 3000 + static_cast<std::uint64_t>(trial));

    Tape tape;
    const GenerationResult out = model.greedy(tape, ex, 10);
    for (std::size_t i = 0; i < out.tokens.size(); ++i) {
      if (ex.ext.is_extended(ex.ext.encode(out.tokens[i]))) {
        ++found;
        CHECK(out.steps[i].provenance == Provenance::COPIED);
        CHECK(out.steps[i].source_position >= 0);
      }
    }
  }
  CHECK(found > 0);
}

TEST_CASE("loss drops over fifty optimizer steps on one example") {
  Rng rng(205);
  std::vector<AnnotatedExample> corpus;
  while (corpus.empty()) {
    AnnotatedExample e = mhqg::testing::random_example(rng);
    if (!e.answer_spans.empty()) corpus.push_back(e);
  }
  Vocabulary vocab = Vocabulary::build(corpus, 40, 1);
  Featurizer fz(vocab, TagSet::default_ner(), TagSet::default_pos(), 384);
  ModelExample ex = fz.featurize(corpus[0]);

  ModelConfig mc = mhqg::testing::micro_config(vocab.size());
  mc.ner_count = TagSet::default_ner().size();
  mc.pos_count = TagSet::default_pos().size();
  QgModel model(mc, 42);

  num::AdamConfig ac;
  ac.lr = 5e-3;
  num::Adam adam(model.parameters(), ac);

  double first = 0.0, last = 0.0;
  for (int step = 0; step < 50; ++step) {
    adam.zero_grad();
    Tape tape;
    Var loss = model.loss(tape, ex);
    if (step == 0) first = loss.value().at(0);
    last = loss.value().at(0);
    tape.backward(loss);
    adam.step();
  }
  CHECK(last < first);
}
