#include "mhqg/vocabulary.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "mhqg/hash.hpp"

namespace mhqg {

const char* Vocabulary::reserved_token(int id) {
  switch (id) {
    case kPad: return "<pad>";
    case kUnk: return "<unk>";
    case kBos: return "<s>";
    case kEos: return "</s>";
  }
  throw ConfigError("not a reserved vocabulary id: " + std::to_string(id));
}

Vocabulary::Vocabulary() {
  for (int i = 0; i < kReserved; ++i) push_token(reserved_token(i), 0);
}

void Vocabulary::push_token(std::string token, std::uint64_t count) {
  const int id = static_cast<int>(id_to_token_.size());
  token_to_id_.emplace(token, id);
  id_to_token_.push_back(std::move(token));
  counts_.push_back(count);
}

int Vocabulary::encode(std::string_view token) const {
  const auto it = token_to_id_.find(fold_case(token));
  return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::decode(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw DataError("vocabulary id out of range: " + std::to_string(id));
  }
  return id_to_token_[id];
}

Vocabulary Vocabulary::build(const std::vector<AnnotatedExample>& examples, std::size_t max_size,
                             std::uint64_t min_frequency) {
  if (examples.empty()) throw DataError("cannot build a vocabulary from zero examples");
  if (max_size < kReserved) {
    throw ConfigError("vocabulary max_size " + std::to_string(max_size) +
                      " is below the reserved token count");
  }

  // std::map keeps tokens sorted, which settles frequency ties.
  std::map<std::string, std::uint64_t> counts;
  for (const AnnotatedExample& e : examples) {
    for (const AnnotatedDocument& d : e.documents) {
      for (const AnnotatedToken& t : d.text_tokens) ++counts[fold_case(t.surface)];
      for (const AnnotatedToken& t : d.title_tokens) ++counts[fold_case(t.surface)];
    }
    for (const std::string& t : e.reference_question) ++counts[fold_case(t)];
  }

  std::vector<std::pair<std::string, std::uint64_t>> ranked;
  ranked.reserve(counts.size());
  for (auto& kv : counts) {
    if (kv.second >= min_frequency) ranked.emplace_back(kv.first, kv.second);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocabulary v;
  const std::size_t budget = max_size - kReserved;
  for (std::size_t i = 0; i < ranked.size() && i < budget; ++i) {
    v.push_token(ranked[i].first, ranked[i].second);
  }
  return v;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open vocabulary file for writing: " + path.string());
  for (std::size_t id = kReserved; id < id_to_token_.size(); ++id) {
    out << id_to_token_[id] << "\t" << counts_[id] << "\n";
  }
  if (!out) throw DataError("write failed: " + path.string());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open vocabulary file: " + path.string());
  Vocabulary v;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError("vocabulary line " + std::to_string(lineno) + " has no tab separator");
    }
    std::string token = line.substr(0, tab);
    std::uint64_t count = 0;
    try {
      count = std::stoull(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw DataError("vocabulary line " + std::to_string(lineno) + " has a bad count");
    }
    if (v.token_to_id_.count(token)) {
      throw DataError("duplicate vocabulary token: " + token);
    }
    v.push_token(std::move(token), count);
  }
  return v;
}

std::string Vocabulary::digest() const {
  std::string blob;
  for (std::size_t id = 0; id < id_to_token_.size(); ++id) {
    blob += id_to_token_[id];
    blob.push_back('\n');
  }
  return sha256_hex(blob);
}

}  // namespace mhqg
