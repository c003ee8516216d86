#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace mhqg {

using TokenSeq = std::vector<std::string>;

// Metric tokenization: case folding plus punctuation detachment, applied
// identically to candidates and references.
TokenSeq metric_tokenize(std::string_view text);

struct BleuResult {
  std::array<double, 4> bleu{};                 // orders 1..4
  std::array<std::uint64_t, 4> clipped_matches{};
  std::array<std::uint64_t, 4> total_ngrams{};
  std::uint64_t candidate_length = 0;
  std::uint64_t reference_length = 0;
  double brevity_penalty = 0.0;
};

// Corpus-level modified n-gram precision with clipping, geometric mean over
// orders, brevity penalty, no smoothing: a zero precision at any order in
// 1..n zeroes BLEU-n.
BleuResult corpus_bleu(const std::vector<TokenSeq>& candidates,
                       const std::vector<TokenSeq>& references, std::size_t max_n = 4);

// LCS-based F measure with beta^2 = 12 (recall-weighted); the corpus score
// is the mean over pairs. An empty candidate scores 0 for its pair.
double rouge_l_pair(const TokenSeq& candidate, const TokenSeq& reference);
double corpus_rouge_l(const std::vector<TokenSeq>& candidates,
                      const std::vector<TokenSeq>& references);

// Named-entity surface extractor over a token sequence; surfaces are
// case-folded, deduplication happens inside the metric.
using NeExtractor = std::function<std::vector<std::string>(const TokenSeq&)>;

// Extractor backed by the fallback annotator's capitalization heuristic.
std::vector<std::string> fallback_ne_surfaces(const TokenSeq& tokens);

struct NePrResult {
  double precision = 0.0;
  double recall = 0.0;
  std::uint64_t precision_matches = 0;
  std::uint64_t precision_total = 0;  // NEs in generated questions (pairs with >=1)
  std::uint64_t recall_matches = 0;
  std::uint64_t recall_total = 0;     // NEs in reference questions (pairs with >=1)
};

// Precision = |NEs in both| / |NEs in generated|, recall analogous; pairs
// with a zero denominator are excluded from that ratio. Micro averaging
// pools counts over pairs; macro averages per-pair ratios.
NePrResult ne_precision_recall(const std::vector<TokenSeq>& generated,
                               const std::vector<TokenSeq>& references,
                               const NeExtractor& extractor, bool micro = true);

struct MetricReport {
  std::array<double, 4> bleu{};
  double rouge_l = 0.0;
  double ne_precision = 0.0;
  double ne_recall = 0.0;
  BleuResult bleu_counts;
  NePrResult ne_counts;
  std::size_t pair_count = 0;

  std::string to_json() const;
  std::string to_table() const;
  static MetricReport from_json(const std::string& text);
};

MetricReport compute_metrics(const std::vector<TokenSeq>& candidates,
                             const std::vector<TokenSeq>& references,
                             const NeExtractor& extractor, bool micro_ne = true);

}  // namespace mhqg
