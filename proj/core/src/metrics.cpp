#include "mhqg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mhqg/annotation.hpp"
#include "mhqg/common.hpp"

namespace mhqg {

using nlohmann::json;

TokenSeq metric_tokenize(std::string_view text) {
  TokenSeq out;
  for (const std::string& tok : tokenize_surfaces(text)) out.push_back(fold_case(tok));
  return out;
}

namespace {

// n-grams as joined strings; order is small so this stays cheap.
std::map<std::string, std::uint64_t> ngram_counts(const TokenSeq& tokens, std::size_t n) {
  std::map<std::string, std::uint64_t> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key;
    for (std::size_t k = 0; k < n; ++k) {
      if (k) key.push_back('\x1f');
      key += tokens[i + k];
    }
    ++counts[key];
  }
  return counts;
}

}  // namespace

BleuResult corpus_bleu(const std::vector<TokenSeq>& candidates,
                       const std::vector<TokenSeq>& references, std::size_t max_n) {
  if (candidates.size() != references.size()) {
    throw DataError("BLEU needs equal-length candidate and reference lists");
  }
  if (max_n < 1 || max_n > 4) throw ConfigError("BLEU order must be in 1..4");
  for (const TokenSeq& r : references) {
    if (r.empty()) throw DataError("BLEU reference must be non-empty");
  }

  BleuResult res;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    res.candidate_length += candidates[i].size();
    res.reference_length += references[i].size();
    for (std::size_t n = 1; n <= max_n; ++n) {
      const auto cand = ngram_counts(candidates[i], n);
      const auto ref = ngram_counts(references[i], n);
      for (const auto& [gram, count] : cand) {
        res.total_ngrams[n - 1] += count;
        const auto it = ref.find(gram);
        if (it != ref.end()) res.clipped_matches[n - 1] += std::min(count, it->second);
      }
    }
  }

  const double c = static_cast<double>(res.candidate_length);
  const double r = static_cast<double>(res.reference_length);
  res.brevity_penalty = (c == 0.0) ? 0.0 : (c > r ? 1.0 : std::exp(1.0 - r / c));

  for (std::size_t n = 1; n <= max_n; ++n) {
    double log_sum = 0.0;
    bool zero = false;
    for (std::size_t k = 1; k <= n; ++k) {
      if (res.total_ngrams[k - 1] == 0 || res.clipped_matches[k - 1] == 0) {
        zero = true;
        break;
      }
      log_sum += std::log(static_cast<double>(res.clipped_matches[k - 1]) /
                          static_cast<double>(res.total_ngrams[k - 1]));
    }
    res.bleu[n - 1] =
        zero ? 0.0 : res.brevity_penalty * std::exp(log_sum / static_cast<double>(n));
  }
  return res;
}

double rouge_l_pair(const TokenSeq& candidate, const TokenSeq& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const std::size_t m = candidate.size(), n = reference.size();
  std::vector<std::size_t> prev(n + 1, 0), cur(n + 1, 0);
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      cur[j] = candidate[i - 1] == reference[j - 1] ? prev[j - 1] + 1
                                                    : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  const double lcs = static_cast<double>(prev[n]);
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(m);
  const double r = lcs / static_cast<double>(n);
  constexpr double beta2 = 12.0;
  return (1.0 + beta2) * p * r / (r + beta2 * p);
}

double corpus_rouge_l(const std::vector<TokenSeq>& candidates,
                      const std::vector<TokenSeq>& references) {
  if (candidates.size() != references.size()) {
    throw DataError("ROUGE-L needs equal-length candidate and reference lists");
  }
  if (candidates.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    sum += rouge_l_pair(candidates[i], references[i]);
  }
  return sum / static_cast<double>(candidates.size());
}

std::vector<std::string> fallback_ne_surfaces(const TokenSeq& tokens) {
  std::string joined;
  for (const std::string& t : tokens) {
    if (!joined.empty()) joined.push_back(' ');
    joined += t;
  }
  std::vector<std::string> out;
  const auto annotated = fallback_annotate(joined);
  std::size_t i = 0;
  while (i < annotated.size()) {
    if (annotated[i].ner_tag == "NONE") {
      ++i;
      continue;
    }
    std::string surface;
    while (i < annotated.size() && annotated[i].ner_tag != "NONE") {
      if (!surface.empty()) surface.push_back(' ');
      surface += annotated[i].lemma_or_lowercase;
      ++i;
    }
    out.push_back(std::move(surface));
  }
  return out;
}

NePrResult ne_precision_recall(const std::vector<TokenSeq>& generated,
                               const std::vector<TokenSeq>& references,
                               const NeExtractor& extractor, bool micro) {
  if (generated.size() != references.size()) {
    throw DataError("NE metric needs equal-length lists");
  }
  NePrResult res;
  double macro_p = 0.0, macro_r = 0.0;
  std::size_t p_pairs = 0, r_pairs = 0;

  for (std::size_t i = 0; i < generated.size(); ++i) {
    std::set<std::string> gen, ref;
    for (std::string& s : extractor(generated[i])) gen.insert(fold_case(s));
    for (std::string& s : extractor(references[i])) ref.insert(fold_case(s));
    std::size_t both = 0;
    for (const std::string& s : gen) both += ref.count(s);

    if (!gen.empty()) {
      res.precision_matches += both;
      res.precision_total += gen.size();
      macro_p += static_cast<double>(both) / static_cast<double>(gen.size());
      ++p_pairs;
    }
    if (!ref.empty()) {
      res.recall_matches += both;
      res.recall_total += ref.size();
      macro_r += static_cast<double>(both) / static_cast<double>(ref.size());
      ++r_pairs;
    }
  }

  if (micro) {
    res.precision = res.precision_total > 0 ? static_cast<double>(res.precision_matches) /
                                                  static_cast<double>(res.precision_total)
                                            : 0.0;
    res.recall = res.recall_total > 0 ? static_cast<double>(res.recall_matches) /
                                            static_cast<double>(res.recall_total)
                                      : 0.0;
  } else {
    res.precision = p_pairs > 0 ? macro_p / static_cast<double>(p_pairs) : 0.0;
    res.recall = r_pairs > 0 ? macro_r / static_cast<double>(r_pairs) : 0.0;
  }
  return res;
}

MetricReport compute_metrics(const std::vector<TokenSeq>& candidates,
                             const std::vector<TokenSeq>& references,
                             const NeExtractor& extractor, bool micro_ne) {
  MetricReport report;
  report.pair_count = candidates.size();
  report.bleu_counts = corpus_bleu(candidates, references, 4);
  report.bleu = report.bleu_counts.bleu;
  report.rouge_l = corpus_rouge_l(candidates, references);
  report.ne_counts = ne_precision_recall(candidates, references, extractor, micro_ne);
  report.ne_precision = report.ne_counts.precision;
  report.ne_recall = report.ne_counts.recall;
  return report;
}

std::string MetricReport::to_json() const {
  json j{{"bleu1", bleu[0]},
         {"bleu2", bleu[1]},
         {"bleu3", bleu[2]},
         {"bleu4", bleu[3]},
         {"rouge_l", rouge_l},
         {"ne_precision", ne_precision},
         {"ne_recall", ne_recall},
         {"pairs", pair_count},
         {"counts",
          {{"clipped_matches", bleu_counts.clipped_matches},
           {"total_ngrams", bleu_counts.total_ngrams},
           {"candidate_length", bleu_counts.candidate_length},
           {"reference_length", bleu_counts.reference_length},
           {"brevity_penalty", bleu_counts.brevity_penalty},
           {"ne_precision_matches", ne_counts.precision_matches},
           {"ne_precision_total", ne_counts.precision_total},
           {"ne_recall_matches", ne_counts.recall_matches},
           {"ne_recall_total", ne_counts.recall_total}}}};
  return j.dump(2);
}

MetricReport MetricReport::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& ex) {
    throw DataError(std::string("malformed metric report: ") + ex.what());
  }
  MetricReport r;
  r.bleu = {j.at("bleu1").get<double>(), j.at("bleu2").get<double>(), j.at("bleu3").get<double>(),
            j.at("bleu4").get<double>()};
  r.rouge_l = j.at("rouge_l").get<double>();
  r.ne_precision = j.at("ne_precision").get<double>();
  r.ne_recall = j.at("ne_recall").get<double>();
  r.pair_count = j.at("pairs").get<std::size_t>();
  return r;
}

std::string MetricReport::to_table() const {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(4);
  os << "pairs        " << pair_count << "\n"
     << "BLEU-1       " << bleu[0] << "\n"
     << "BLEU-2       " << bleu[1] << "\n"
     << "BLEU-3       " << bleu[2] << "\n"
     << "BLEU-4       " << bleu[3] << "\n"
     << "ROUGE-L      " << rouge_l << "\n"
     << "NE precision " << ne_precision << "\n"
     << "NE recall    " << ne_recall << "\n";
  return os.str();
}

}  // namespace mhqg
