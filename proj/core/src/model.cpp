#include "mhqg/model.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mhqg {

using nlohmann::json;
using num::Tape;
using num::Tensor;
using num::Var;

void ModelConfig::validate() const {
  if (vocab_size < Vocabulary::kReserved) throw ConfigError("vocab_size below reserved tokens");
  if (hidden == 0 || hidden % 2 != 0) {
    throw ConfigError("hidden size must be positive and even, got " + std::to_string(hidden));
  }
  if (word_dim == 0 || answer_dim == 0 || feat_dim == 0) {
    throw ConfigError("embedding dimensions must be positive");
  }
  if (rgcn_layers < 1) throw ConfigError("rgcn_layers must be at least 1");
  if (rgcn_bases < 1) throw ConfigError("rgcn_bases must be at least 1");
  if (ner_count < 1 || pos_count < 1 || case_count < 1) {
    throw ConfigError("tag set sizes must be positive");
  }
}

std::string ModelConfig::to_json() const {
  json j{{"vocab_size", vocab_size}, {"word_dim", word_dim},     {"answer_dim", answer_dim},
         {"feat_dim", feat_dim},     {"hidden", hidden},         {"attn_dim", attn_dim},
         {"rgcn_layers", rgcn_layers}, {"rgcn_bases", rgcn_bases}, {"case_count", case_count},
         {"ner_count", ner_count},   {"pos_count", pos_count},   {"init_range", init_range}};
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& ex) {
    throw DataError(std::string("malformed model config: ") + ex.what());
  }
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.word_dim = j.at("word_dim").get<std::size_t>();
  c.answer_dim = j.at("answer_dim").get<std::size_t>();
  c.feat_dim = j.at("feat_dim").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.attn_dim = j.at("attn_dim").get<std::size_t>();
  c.rgcn_layers = j.at("rgcn_layers").get<std::size_t>();
  c.rgcn_bases = j.at("rgcn_bases").get<std::size_t>();
  c.case_count = j.at("case_count").get<std::size_t>();
  c.ner_count = j.at("ner_count").get<std::size_t>();
  c.pos_count = j.at("pos_count").get<std::size_t>();
  c.init_range = j.at("init_range").get<double>();
  return c;
}

AnnotatedExample truncate_example(AnnotatedExample example, std::size_t max_tokens) {
  if (max_tokens == 0) throw ConfigError("source token budget must be positive");
  std::size_t total = 0;
  for (const AnnotatedDocument& d : example.documents) {
    total += d.text_tokens.size() + d.title_tokens.size();
  }
  if (total <= max_tokens) return example;

  std::vector<AnnotatedDocument> kept;
  std::size_t budget = max_tokens;
  std::vector<std::size_t> text_limit;  // per kept document
  for (AnnotatedDocument& d : example.documents) {
    if (budget == 0) break;
    const std::size_t need = d.text_tokens.size() + d.title_tokens.size();
    std::size_t limit = d.text_tokens.size();
    if (need > budget) {
      if (d.title_tokens.size() + 1 <= budget) {
        limit = budget - d.title_tokens.size();
      } else {
        limit = budget;
        d.title_tokens.clear();
      }
      d.text_tokens.resize(limit);
      budget = 0;
    } else {
      budget -= need;
    }
    // Drop clusters that lost members to the cut.
    std::vector<std::vector<TokenSpan>> clusters;
    for (auto& cluster : d.coref_clusters) {
      std::vector<TokenSpan> spans;
      for (const TokenSpan& s : cluster) {
        if (s.end <= limit) spans.push_back(s);
      }
      if (spans.size() >= 2) clusters.push_back(std::move(spans));
    }
    d.coref_clusters = std::move(clusters);
    text_limit.push_back(limit);
    kept.push_back(std::move(d));
  }
  example.documents = std::move(kept);

  std::vector<AnswerSpan> spans;
  for (const AnswerSpan& a : example.answer_spans) {
    if (a.doc < example.documents.size() && a.span.end <= text_limit[a.doc]) spans.push_back(a);
  }
  example.answer_spans = std::move(spans);
  return example;
}

Featurizer::Featurizer(const Vocabulary& vocab, TagSet ner_tags, TagSet pos_tags,
                       std::size_t max_source_tokens)
    : vocab_(&vocab),
      ner_tags_(std::move(ner_tags)),
      pos_tags_(std::move(pos_tags)),
      max_source_tokens_(max_source_tokens) {}

ModelExample Featurizer::featurize(const AnnotatedExample& raw) const {
  AnnotatedExample example = truncate_example(raw, max_source_tokens_);
  if (example.answer_spans.empty()) {
    throw DataError("example " + example.example_id +
                    " has no answer span inside the source token budget");
  }

  ModelExample out;
  out.example_id = example.example_id;
  out.graph = ground(example);

  const GlobalOffsets off(example);
  const std::vector<const AnnotatedToken*> tokens = flat_tokens(example);
  const std::size_t m = tokens.size();
  if (m == 0) throw DataError("example " + example.example_id + " has no tokens");

  out.input.token_ids.reserve(m);
  out.source_folded.reserve(m);
  for (const AnnotatedToken* t : tokens) {
    const std::string folded = fold_case(t->surface);
    out.input.token_ids.push_back(vocab_->encode(folded));
    out.input.ner_ids.push_back(ner_tags_.id(t->ner_tag));
    out.input.pos_ids.push_back(pos_tags_.id(t->pos_tag));
    out.input.case_ids.push_back(static_cast<int>(t->case_flag));
    out.source_folded.push_back(folded);
  }

  out.input.answer_tags.assign(m, kAnswerTagO);
  int first = -1;
  for (const AnswerSpan& a : example.answer_spans) {
    const std::size_t start = off.to_global(a.doc, false, a.span.start);
    for (std::size_t i = 1; i < a.span.size(); ++i) {
      if (out.input.answer_tags[start + i] == kAnswerTagO) {
        out.input.answer_tags[start + i] = kAnswerTagI;
      }
    }
    out.input.answer_tags[start] = kAnswerTagB;
    if (first < 0 || static_cast<int>(start) < first) first = static_cast<int>(start);
  }
  out.input.answer_first_pos = first;

  out.input.node_mask.assign(m, 0);
  for (const GraphNode& node : out.graph.nodes) {
    for (const Mention& mention : node.mentions) {
      for (std::size_t t = mention.global_start; t < mention.global_end; ++t) {
        out.input.node_mask[t] = 1;
      }
    }
  }

  out.ext = ExtendedVocab::build(*vocab_, out.source_folded);
  out.source_ext_ids.reserve(m);
  for (const std::string& tok : out.source_folded) {
    out.source_ext_ids.push_back(static_cast<std::size_t>(out.ext.encode(tok)));
  }

  for (const std::string& tok : example.reference_question) {
    const std::string folded = fold_case(tok);
    out.reference_folded.push_back(folded);
    out.reference_ids.push_back(out.ext.encode(folded));
  }
  return out;
}

namespace {

Tensor uniform_tensor(std::vector<std::size_t> shape, Rng& rng, double range) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = rng.uniform(-range, range);
  return t;
}

EncoderParams make_encoder_params(const ModelConfig& c, Rng& rng) {
  const std::size_t embed_dim = c.word_dim + c.answer_dim + c.feat_dim;
  const std::size_t half = c.hidden / 2;
  const std::size_t attn = c.attn_dim == 0 ? c.hidden : c.attn_dim;
  const double r = c.init_range;
  EncoderParams p{
      EmbedderParams{
          num::Parameter("embed.word", uniform_tensor({c.vocab_size, c.word_dim}, rng, r)),
          num::Parameter("embed.answer_pos",
                         uniform_tensor({kAnswerTagCount, c.answer_dim}, rng, r)),
          num::Parameter("embed.case", uniform_tensor({c.case_count, c.feat_dim}, rng, r)),
          num::Parameter("embed.ner", uniform_tensor({c.ner_count, c.feat_dim}, rng, r)),
          num::Parameter("embed.pos", uniform_tensor({c.pos_count, c.feat_dim}, rng, r))},
      make_lstm_params("encoder.fwd", embed_dim, half, rng, r),
      make_lstm_params("encoder.bwd", embed_dim, half, rng, r),
      num::Parameter("encoder.gsa_w_score", uniform_tensor({attn}, rng, r)),
      num::Parameter("encoder.gsa_w_self", uniform_tensor({attn, c.hidden}, rng, r)),
      num::Parameter("encoder.gsa_w_ctx", uniform_tensor({attn, c.hidden}, rng, r)),
      make_gru_params("encoder.gsa_fwd", 2 * c.hidden, half, rng, r),
      make_gru_params("encoder.gsa_bwd", 2 * c.hidden, half, rng, r),
      num::Parameter("encoder.answer_gate_w", uniform_tensor({c.hidden, c.hidden}, rng, r))};
  return p;
}

}  // namespace

QgModel::QgModel(ModelConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  encoder_ = make_encoder_params(config_, rng);
  reasoner_ = make_reasoner_params(config_.rgcn_layers, config_.rgcn_bases, config_.hidden, rng,
                                   config_.init_range);
  decoder_ = make_decoder_params(config_.word_dim, config_.hidden, config_.vocab_size, rng,
                                 config_.init_range);
}

std::vector<num::Parameter*> QgModel::parameters() {
  std::vector<num::Parameter*> out;
  encoder_.collect(out);
  reasoner_.collect(out);
  decoder_.collect(out);
  return out;
}

QgModel::Forward QgModel::forward(Tape& tape, const ModelExample& example) {
  Forward f;
  f.enc = encode_document(tape, encoder_, example.input);
  Var initial = init_node_states(tape, f.enc.H_a, example.graph);
  f.node_layers = reason(tape, reasoner_, initial, example.graph);
  AggregateOutput agg = aggregate(tape, reasoner_, f.node_layers, f.enc.H_a, example.graph);
  f.memory = agg.tokens;
  f.memory_t = num::transpose(f.memory);
  f.summary = agg.summary;
  return f;
}

DecodeContext QgModel::decode_context(const Forward& fwd, const ModelExample& example) const {
  DecodeContext ctx;
  ctx.memory = fwd.memory;
  ctx.memory_t = fwd.memory_t;
  ctx.summary = fwd.summary;
  ctx.source_ext_ids = example.source_ext_ids;
  ctx.ext = &example.ext;
  return ctx;
}

Var QgModel::loss(Tape& tape, const ModelExample& example) {
  Forward fwd = forward(tape, example);
  DecodeContext ctx = decode_context(fwd, example);
  return teacher_forced_nll(tape, decoder_, encoder_.embed.word, ctx, example.reference_ids);
}

GenerationResult QgModel::greedy(Tape& tape, const ModelExample& example, std::size_t max_len) {
  Forward fwd = forward(tape, example);
  DecodeContext ctx = decode_context(fwd, example);
  return greedy_decode(tape, decoder_, encoder_.embed.word, ctx, max_len);
}

std::vector<GenerationResult> QgModel::beam(Tape& tape, const ModelExample& example,
                                            std::size_t beam_size, std::size_t max_len) {
  Forward fwd = forward(tape, example);
  DecodeContext ctx = decode_context(fwd, example);
  return beam_search(tape, decoder_, encoder_.embed.word, ctx, beam_size, max_len);
}

std::size_t QgModel::load_pretrained_embeddings(const std::filesystem::path& path,
                                                const Vocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open embedding file: " + path.string());
  Tensor& table = encoder_.embed.word.value;
  std::size_t loaded = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    const int id = vocab.encode(token);
    if (id == Vocabulary::kUnk) {
      // Still consume to detect dimension mismatches early on the first row.
      continue;
    }
    std::vector<double> values;
    double v;
    while (ss >> v) values.push_back(v);
    if (values.size() != config_.word_dim) {
      throw DataError("embedding row for '" + token + "' has " +
                      std::to_string(values.size()) + " values, expected " +
                      std::to_string(config_.word_dim));
    }
    for (std::size_t j = 0; j < values.size(); ++j) {
      table.at(static_cast<std::size_t>(id), j) = values[j];
    }
    ++loaded;
  }
  return loaded;
}

}  // namespace mhqg
