#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace latprobe::io {

enum class Axis { pos = 0, neg = 1, neu = 2 };

/// word -> (pos, neg, neu), each triple summing to 1.
struct SentimentLexicon {
  std::map<std::string, std::array<double, 3>> entries;
};

/// Dense (word, group) count table. Words and groups are sorted.
struct CooccurrenceCounts {
  std::vector<std::string> words;
  std::vector<std::string> groups;
  std::vector<std::uint64_t> counts;  // words.size() x groups.size()

  std::uint64_t at(std::size_t w, std::size_t g) const { return counts[w * groups.size() + g]; }
  std::size_t word_index(const std::string& w) const;   // throws domain error if absent
  std::size_t group_index(const std::string& g) const;  // throws domain error if absent
};

CooccurrenceCounts make_counts(const std::vector<std::tuple<std::string, std::string, std::uint64_t>>& rows);

/// Presence of words in entities ("documents"), and each entity's group.
struct EntityCounts {
  std::set<std::pair<std::string, std::string>> presence;  // (word, entity)
  std::map<std::string, std::string> entity_group;
};

struct EmbeddingSet {
  std::size_t dim = 0;
  std::map<std::string, std::vector<double>> vectors;

  const std::vector<double>& at(const std::string& word) const;  // throws domain error if absent
};

struct PplRecord {
  std::string category;
  std::string stereotype;
  std::string identity;
  double ppl_probe = 0.0;
  double ppl_identity = 0.0;
};

struct PplTable {
  std::vector<PplRecord> records;
};

SentimentLexicon load_lexicon(const std::filesystem::path& path);
CooccurrenceCounts load_counts(const std::filesystem::path& path);
EntityCounts load_entity_counts(const std::filesystem::path& path);
EmbeddingSet load_embeddings(const std::filesystem::path& path);
PplTable load_ppl_table(const std::filesystem::path& path);

/// Validation shared by the loaders and in-memory constructors.
void validate(const SentimentLexicon& lex);
void validate(const PplTable& table);

}  // namespace latprobe::io
