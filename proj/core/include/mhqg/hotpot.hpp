#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "mhqg/annotation.hpp"

namespace mhqg {

struct IngestStats {
  std::size_t records_read = 0;
  std::size_t kept = 0;
  std::size_t malformed_skipped = 0;
  std::size_t comparison_dropped = 0;
  std::size_t no_supporting_facts = 0;
  std::size_t answer_not_found = 0;
};

struct IngestResult {
  std::vector<AnnotatedExample> examples;
  IngestStats stats;
};

// Reads the published multi-hop QA record format (one question per record,
// candidate paragraphs, sentence-level supporting-fact labels). Keeps only
// the supporting-fact sentences of each gold document (original sentence
// order, title retained), drops comparison-type questions, annotates with
// the given annotator and locates answer spans by case-folded token match.
// Records that are malformed, have no supporting facts, or whose answer
// cannot be located are skipped and counted.
IngestResult ingest_hotpot(const std::filesystem::path& raw_file, const Annotator& annotator);

// Re-reads an already-annotated corpus (the canonical JSONL schema),
// validating it and applying the comparison-type filter. This is the
// ingestion path for externally produced annotations.
IngestResult ingest_annotated_jsonl(const std::filesystem::path& file, const TagSet& ner_tags,
                                    const TagSet& pos_tags);

struct SplitResult {
  std::vector<AnnotatedExample> train;
  std::vector<AnnotatedExample> dev;
  std::vector<AnnotatedExample> test;
};

// Deterministic shuffled split. Sizes: dev = floor(n*ratios[1]),
// test = floor(n*ratios[2]), train = remainder. Ratios must sum to 1.
SplitResult split(std::vector<AnnotatedExample> examples, std::uint64_t seed,
                  std::array<double, 3> ratios);

// Same shuffle, but with absolute dev/test sizes (train takes the rest).
SplitResult split_sizes(std::vector<AnnotatedExample> examples, std::uint64_t seed,
                        std::size_t dev_size, std::size_t test_size);

}  // namespace mhqg
