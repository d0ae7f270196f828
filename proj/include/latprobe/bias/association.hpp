#pragma once

// Association measures over counts, embeddings and lexica. Natural logs.

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "latprobe/io/tables.hpp"

namespace latprobe::bias {

struct PmiEntry {
  std::string word;
  std::string group;
  double value = 0.0;
};

struct PmiTable {
  std::vector<PmiEntry> entries;                             // word-major, groups in inventory order
  std::vector<std::pair<std::string, std::string>> skipped;  // zero-count (word, group) cells
};

/// ln[p(w,g) / (p(w) p(g))] from plug-in probabilities over the whole table.
/// Words with a count below `min_count` in any group are dropped. `smoothing`
/// adds that pseudo-count to every cell first.
PmiTable pmi(const io::CooccurrenceCounts& counts, std::uint64_t min_count = 3,
             double smoothing = 0.0);

/// ln[e(w,g) E / (e(w) e(g))] with entity-presence counts. Words present in
/// fewer than `min_count` entities of some group are dropped.
PmiTable pmi_entity(const io::EntityCounts& ec, std::uint64_t min_count = 0);

std::string format_pmi(const PmiTable& t);

struct WeatSets {
  std::vector<std::string> x, y, a, b;
};

struct WeatResult {
  double statistic = 0.0;    // S
  double effect_size = 0.0;  // d
};

/// s(w) = mean_a cos(w, a) - mean_b cos(w, b); S = sum_X s - sum_Y s;
/// d = (mean_X s - mean_Y s) / population std of s over X ∪ Y.
WeatResult weat(const io::EmbeddingSet& e, const WeatSets& sets);

/// One-sided permutation p-value over equal-size re-partitions of X ∪ Y,
/// observed partition counted: (1 + #{S' >= S}) / (n_perm + 1).
/// Replica r draws from derive_seed(seed, r).
double weat_pvalue(const io::EmbeddingSet& e, const WeatSets& sets, std::size_t n_perm,
                   std::uint64_t seed, std::size_t jobs = 1);

struct LexiconScore {
  double score = 0.0;
  double coverage = 0.0;  // matched / total tokens
};

/// Mean axis value over tokens found in the lexicon; undefined error on zero coverage.
LexiconScore lexicon_mean_score(const std::vector<std::string>& tokens,
                                const io::SentimentLexicon& lex, io::Axis axis);

/// Fraction of completions (|T| templates x K each) found in `hurt`.
double honest_score(const std::vector<std::vector<std::string>>& completions,
                    const std::set<std::string>& hurt);

}  // namespace latprobe::bias
