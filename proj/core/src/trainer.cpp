#include "mhqg/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "mhqg/adam.hpp"

namespace mhqg {

using nlohmann::json;
using num::Tape;
using num::Var;

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
  if (grad_clip_norm < 0.0) throw ConfigError("grad_clip_norm must be non-negative");
  if (beam_size == 0) throw ConfigError("beam_size must be positive");
  if (max_decode_len == 0) throw ConfigError("max_decode_len must be positive");
  if (max_source_tokens == 0) throw ConfigError("max_source_tokens must be positive");
  if (precision != "double") {
    throw ConfigError("precision '" + precision + "' not supported; this build runs in double");
  }
  if (hidden == 0 || hidden % 2 != 0) throw ConfigError("hidden must be positive and even");
  if (rgcn_layers < 1 || rgcn_bases < 1) {
    throw ConfigError("rgcn_layers and rgcn_bases must be at least 1");
  }
  if (vocab_max_size < Vocabulary::kReserved) {
    throw ConfigError("vocab_max_size below the reserved token count");
  }
}

std::string TrainConfig::to_json() const {
  json j{{"batch_size", batch_size},
         {"epochs", epochs},
         {"learning_rate", learning_rate},
         {"lr_halving_patience", lr_halving_patience},
         {"grad_clip_norm", grad_clip_norm},
         {"target_train_loss", target_train_loss},
         {"seed", seed},
         {"precision", precision},
         {"word_dim", word_dim},
         {"answer_dim", answer_dim},
         {"feat_dim", feat_dim},
         {"hidden", hidden},
         {"attn_dim", attn_dim},
         {"rgcn_layers", rgcn_layers},
         {"rgcn_bases", rgcn_bases},
         {"max_source_tokens", max_source_tokens},
         {"max_decode_len", max_decode_len},
         {"beam_size", beam_size},
         {"vocab_max_size", vocab_max_size},
         {"vocab_min_freq", vocab_min_freq},
         {"pretrained_embeddings", pretrained_embeddings}};
  return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& ex) {
    throw DataError(std::string("malformed train config: ") + ex.what());
  }
  TrainConfig c;
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.lr_halving_patience = j.value("lr_halving_patience", c.lr_halving_patience);
  c.grad_clip_norm = j.value("grad_clip_norm", c.grad_clip_norm);
  c.target_train_loss = j.value("target_train_loss", c.target_train_loss);
  c.seed = j.value("seed", c.seed);
  c.precision = j.value("precision", c.precision);
  c.word_dim = j.value("word_dim", c.word_dim);
  c.answer_dim = j.value("answer_dim", c.answer_dim);
  c.feat_dim = j.value("feat_dim", c.feat_dim);
  c.hidden = j.value("hidden", c.hidden);
  c.attn_dim = j.value("attn_dim", c.attn_dim);
  c.rgcn_layers = j.value("rgcn_layers", c.rgcn_layers);
  c.rgcn_bases = j.value("rgcn_bases", c.rgcn_bases);
  c.max_source_tokens = j.value("max_source_tokens", c.max_source_tokens);
  c.max_decode_len = j.value("max_decode_len", c.max_decode_len);
  c.beam_size = j.value("beam_size", c.beam_size);
  c.vocab_max_size = j.value("vocab_max_size", c.vocab_max_size);
  c.vocab_min_freq = j.value("vocab_min_freq", c.vocab_min_freq);
  c.pretrained_embeddings = j.value("pretrained_embeddings", c.pretrained_embeddings);
  return c;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  try {
    if constexpr (std::is_floating_point_v<T>) {
      return static_cast<T>(std::stod(value));
    } else {
      return static_cast<T>(std::stoull(value));
    }
  } catch (const std::exception&) {
    throw ConfigError("bad value for " + key + ": '" + value + "'");
  }
}

}  // namespace

void TrainConfig::set(const std::string& key, const std::string& value) {
  if (key == "batch_size") batch_size = parse_number<std::size_t>(key, value);
  else if (key == "epochs") epochs = parse_number<std::size_t>(key, value);
  else if (key == "learning_rate") learning_rate = parse_number<double>(key, value);
  else if (key == "lr_halving_patience") lr_halving_patience = parse_number<std::size_t>(key, value);
  else if (key == "grad_clip_norm") grad_clip_norm = parse_number<double>(key, value);
  else if (key == "target_train_loss") target_train_loss = parse_number<double>(key, value);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "precision") precision = value;
  else if (key == "word_dim") word_dim = parse_number<std::size_t>(key, value);
  else if (key == "answer_dim") answer_dim = parse_number<std::size_t>(key, value);
  else if (key == "feat_dim") feat_dim = parse_number<std::size_t>(key, value);
  else if (key == "hidden") hidden = parse_number<std::size_t>(key, value);
  else if (key == "attn_dim") attn_dim = parse_number<std::size_t>(key, value);
  else if (key == "rgcn_layers") rgcn_layers = parse_number<std::size_t>(key, value);
  else if (key == "rgcn_bases") rgcn_bases = parse_number<std::size_t>(key, value);
  else if (key == "max_source_tokens") max_source_tokens = parse_number<std::size_t>(key, value);
  else if (key == "max_decode_len") max_decode_len = parse_number<std::size_t>(key, value);
  else if (key == "beam_size") beam_size = parse_number<std::size_t>(key, value);
  else if (key == "vocab_max_size") vocab_max_size = parse_number<std::size_t>(key, value);
  else if (key == "vocab_min_freq") vocab_min_freq = parse_number<std::uint64_t>(key, value);
  else if (key == "pretrained_embeddings") pretrained_embeddings = value;
  else throw ConfigError("unknown config key: " + key);
}

TrainConfig TrainConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path.string());
  TrainConfig c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    c.set(trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)));
  }
  return c;
}

namespace {

ModelConfig model_config_from(const TrainConfig& t, std::size_t vocab_size, std::size_t ner_count,
                              std::size_t pos_count) {
  ModelConfig m;
  m.vocab_size = vocab_size;
  m.word_dim = t.word_dim;
  m.answer_dim = t.answer_dim;
  m.feat_dim = t.feat_dim;
  m.hidden = t.hidden;
  m.attn_dim = t.attn_dim;
  m.rgcn_layers = t.rgcn_layers;
  m.rgcn_bases = t.rgcn_bases;
  m.ner_count = ner_count;
  m.pos_count = pos_count;
  return m;
}

std::string bundle_config(const ModelConfig& m, const TrainConfig& t) {
  return json{{"model", json::parse(m.to_json())}, {"train", json::parse(t.to_json())}}.dump();
}

std::vector<ModelExample> featurize_all(const Featurizer& fz,
                                        const std::vector<AnnotatedExample>& examples,
                                        const char* split, std::size_t* skipped) {
  std::vector<ModelExample> out;
  out.reserve(examples.size());
  for (const AnnotatedExample& e : examples) {
    try {
      out.push_back(fz.featurize(e));
    } catch (const DataError& ex) {
      std::cerr << "warning: skipping " << split << " example: " << ex.what() << "\n";
      if (skipped != nullptr) ++(*skipped);
    }
  }
  if (out.empty()) throw DataError(std::string("no usable examples in the ") + split + " split");
  return out;
}

double dev_bleu4(QgModel& model, std::vector<ModelExample>& dev, std::size_t max_len) {
  std::vector<TokenSeq> cands, refs;
  cands.reserve(dev.size());
  refs.reserve(dev.size());
  for (ModelExample& ex : dev) {
    Tape tape;
    GenerationResult gen = model.greedy(tape, ex, max_len);
    cands.push_back(gen.tokens);
    refs.push_back(ex.reference_folded);
  }
  return corpus_bleu(cands, refs, 4).bleu[3];
}

}  // namespace

TrainResult train(const std::vector<AnnotatedExample>& train_split,
                  const std::vector<AnnotatedExample>& dev_split, const TagSet& ner_tags,
                  const TagSet& pos_tags, const TrainConfig& config,
                  const std::filesystem::path& out_dir) {
  config.validate();
  if (train_split.empty() || dev_split.empty()) {
    throw DataError("training needs non-empty train and dev splits");
  }
  std::filesystem::create_directories(out_dir);

  const Vocabulary vocab =
      Vocabulary::build(train_split, config.vocab_max_size, config.vocab_min_freq);
  TrainResult result;
  result.vocab_file = out_dir / "vocab.tsv";
  vocab.save(result.vocab_file);

  const Featurizer featurizer(vocab, ner_tags, pos_tags, config.max_source_tokens);
  std::vector<ModelExample> train_ex =
      featurize_all(featurizer, train_split, "train", &result.skipped_examples);
  std::vector<ModelExample> dev_ex =
      featurize_all(featurizer, dev_split, "dev", &result.skipped_examples);

  const ModelConfig mconfig =
      model_config_from(config, vocab.size(), ner_tags.size(), pos_tags.size());
  QgModel model(mconfig, config.seed);
  if (!config.pretrained_embeddings.empty()) {
    const std::size_t loaded = model.load_pretrained_embeddings(config.pretrained_embeddings, vocab);
    std::cerr << "loaded " << loaded << " pretrained embedding rows\n";
  }

  const std::vector<num::Parameter*> params = model.parameters();
  num::AdamConfig adam_config;
  adam_config.lr = config.learning_rate;
  num::Adam optimizer(params, adam_config);

  const std::string config_json = bundle_config(mconfig, config);
  CheckpointMeta meta;
  meta.config_json = config_json;
  meta.vocab_digest = vocab.digest();

  result.best_checkpoint = out_dir / "best.ckpt";
  result.last_checkpoint = out_dir / "last.ckpt";
  std::ofstream log(out_dir / "train_log.jsonl");
  if (!log) throw DataError("cannot open training log in " + out_dir.string());

  Rng shuffler(config.seed);
  double best = -1.0;
  std::size_t stale_epochs = 0;

  std::vector<std::size_t> order(train_ex.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffler.shuffle(order);

    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t batch_end = std::min(order.size(), start + config.batch_size);
      const auto batch_n = static_cast<double>(batch_end - start);
      optimizer.zero_grad();
      for (std::size_t k = start; k < batch_end; ++k) {
        Tape tape;
        Var loss = model.loss(tape, train_ex[order[k]]);
        const double value = loss.value().at(0);
        if (!std::isfinite(value)) {
          throw DivergenceError("loss diverged (example " + train_ex[order[k]].example_id +
                                ", epoch " + std::to_string(epoch) + ")");
        }
        loss_sum += value;
        ++loss_count;
        tape.backward(num::scale_const(loss, 1.0 / batch_n));
      }
      if (config.grad_clip_norm > 0.0) num::clip_grad_norm(params, config.grad_clip_norm);
      optimizer.step();
    }
    const double train_loss = loss_sum / static_cast<double>(loss_count);

    const double bleu4 = dev_bleu4(model, dev_ex, config.max_decode_len);
    const bool improved = bleu4 > best;
    if (improved) {
      best = bleu4;
      stale_epochs = 0;
      meta.epoch = epoch;
      meta.best_dev_bleu4 = best;
      save_checkpoint(result.best_checkpoint, params, &optimizer, meta);
    } else if (config.lr_halving_patience > 0) {
      ++stale_epochs;
      if (stale_epochs >= config.lr_halving_patience) {
        optimizer.set_lr(optimizer.lr() * 0.5);
        stale_epochs = 0;
      }
    }

    EpochRecord rec{epoch, train_loss, bleu4, optimizer.lr(), improved};
    result.history.push_back(rec);
    log << json{{"epoch", rec.epoch},
                {"train_loss", rec.train_loss},
                {"dev_bleu4", rec.dev_bleu4},
                {"lr", rec.lr_after},
                {"improved", rec.improved}}
               .dump()
        << "\n";
    std::cerr << "epoch " << epoch << " loss " << train_loss << " dev BLEU-4 " << bleu4 << " lr "
              << optimizer.lr() << (improved ? " *" : "") << "\n";

    if (config.target_train_loss > 0.0 && train_loss < config.target_train_loss) break;
  }

  {
    CheckpointMeta last = meta;
    last.epoch = result.history.empty() ? 0 : result.history.back().epoch;
    save_checkpoint(result.last_checkpoint, params, &optimizer, last);
  }
  if (best < 0.0) {
    // No epoch ran to completion; still leave a best checkpoint behind.
    save_checkpoint(result.best_checkpoint, params, &optimizer, meta);
  }
  result.best_dev_bleu4 = std::max(0.0, best);
  return result;
}

EvalResult evaluate_checkpoint(const std::filesystem::path& checkpoint_path,
                               const Vocabulary& vocab, const TagSet& ner_tags,
                               const TagSet& pos_tags,
                               const std::vector<AnnotatedExample>& examples,
                               std::size_t beam_size, std::optional<std::size_t> max_len) {
  if (examples.empty()) throw DataError("cannot evaluate on an empty example list");
  if (beam_size == 0) throw ConfigError("beam_size must be positive");

  CheckpointMeta meta = read_checkpoint_meta(checkpoint_path);
  if (meta.vocab_digest != vocab.digest()) {
    throw DataError("checkpoint was trained with a different vocabulary (digest mismatch)");
  }

  json bundle;
  try {
    bundle = json::parse(meta.config_json);
  } catch (const json::exception& ex) {
    throw DataError(std::string("checkpoint carries malformed config: ") + ex.what());
  }
  const ModelConfig mconfig = ModelConfig::from_json(bundle.at("model").dump());
  const TrainConfig tconfig = TrainConfig::from_json(bundle.at("train").dump());
  const std::size_t decode_len = max_len.value_or(tconfig.max_decode_len);

  QgModel model(mconfig, /*seed=*/0);
  load_checkpoint(checkpoint_path, model.parameters(), nullptr, nullptr);

  const Featurizer featurizer(vocab, ner_tags, pos_tags, tconfig.max_source_tokens);

  EvalResult out;
  std::vector<TokenSeq> cands, refs;
  for (const AnnotatedExample& raw : examples) {
    ModelExample ex = featurizer.featurize(raw);
    Tape tape;
    std::vector<GenerationResult> ranked = model.beam(tape, ex, beam_size, decode_len);
    GenerationResult best = ranked.front();
    cands.push_back(best.tokens);
    refs.push_back(ex.reference_folded);
    out.generations.emplace_back(ex.example_id, std::move(best));
  }
  out.report = compute_metrics(cands, refs, fallback_ne_surfaces, /*micro_ne=*/true);
  return out;
}

}  // namespace mhqg
