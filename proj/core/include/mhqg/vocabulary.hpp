#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mhqg/annotation.hpp"

namespace mhqg {

// Shared source/target token table over case-folded surfaces. Ids 0..3 are
// reserved; content tokens follow in frequency order with lexicographic
// tie-break, so equal corpora always produce identical tables.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kReserved = 4;

  static const char* reserved_token(int id);

  Vocabulary();

  // Case-folds the argument; unknown tokens map to UNK.
  int encode(std::string_view token) const;
  const std::string& decode(int id) const;
  bool contains(std::string_view token) const { return encode(token) != kUnk; }

  std::size_t size() const { return id_to_token_.size(); }
  std::uint64_t count(int id) const { return counts_.at(id); }

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  // Stable content digest, used to detect checkpoint/corpus mismatches.
  std::string digest() const;

  // Frequency table over document tokens (text + title) and reference
  // question tokens of the given examples; call with the training split.
  static Vocabulary build(const std::vector<AnnotatedExample>& examples, std::size_t max_size,
                          std::uint64_t min_frequency);

 private:
  void push_token(std::string token, std::uint64_t count);

  std::unordered_map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
  std::vector<std::uint64_t> counts_;
};

// Operation-style alias for Vocabulary::build.
inline Vocabulary build_vocab(const std::vector<AnnotatedExample>& examples, std::size_t max_size,
                              std::uint64_t min_frequency) {
  return Vocabulary::build(examples, max_size, min_frequency);
}

}  // namespace mhqg
