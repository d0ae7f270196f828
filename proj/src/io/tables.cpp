#include "latprobe/io/tables.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "latprobe/error.hpp"
#include "latprobe/util/tsv.hpp"

namespace latprobe::io {

namespace {

std::string at_line(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ": line " + std::to_string(line) + ": ";
}

std::size_t index_of(const std::vector<std::string>& sorted, const std::string& key,
                     const char* what) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(), key);
  require(it != sorted.end() && *it == key, ErrorKind::domain,
          std::string("unknown ") + what + " '" + key + "'");
  return static_cast<std::size_t>(it - sorted.begin());
}

}  // namespace

std::size_t CooccurrenceCounts::word_index(const std::string& w) const {
  return index_of(words, w, "word");
}

std::size_t CooccurrenceCounts::group_index(const std::string& g) const {
  return index_of(groups, g, "group");
}

CooccurrenceCounts make_counts(
    const std::vector<std::tuple<std::string, std::string, std::uint64_t>>& rows) {
  CooccurrenceCounts c;
  std::set<std::string> words, groups;
  for (const auto& [w, g, n] : rows) {
    words.insert(w);
    groups.insert(g);
  }
  c.words.assign(words.begin(), words.end());
  c.groups.assign(groups.begin(), groups.end());
  c.counts.assign(c.words.size() * c.groups.size(), 0);
  std::vector<bool> seen(c.counts.size(), false);
  for (const auto& [w, g, n] : rows) {
    const std::size_t cell = c.word_index(w) * c.groups.size() + c.group_index(g);
    require(!seen[cell], ErrorKind::schema, "duplicate (word, group) pair: " + w + ", " + g);
    seen[cell] = true;
    c.counts[cell] = n;
  }
  return c;
}

const std::vector<double>& EmbeddingSet::at(const std::string& word) const {
  auto it = vectors.find(word);
  require(it != vectors.end(), ErrorKind::domain, "no embedding for '" + word + "'");
  return it->second;
}

void validate(const SentimentLexicon& lex) {
  for (const auto& [word, t] : lex.entries) {
    require(t[0] >= 0 && t[1] >= 0 && t[2] >= 0, ErrorKind::schema,
            "lexicon entry '" + word + "' has a negative value");
    require(std::abs(t[0] + t[1] + t[2] - 1.0) <= 1e-6, ErrorKind::schema,
            "lexicon entry '" + word + "' does not sum to 1");
  }
}

void validate(const PplTable& table) {
  std::set<std::tuple<std::string, std::string, std::string>> keys;
  for (std::size_t i = 0; i < table.records.size(); ++i) {
    const auto& r = table.records[i];
    require(r.ppl_probe > 0 && r.ppl_identity > 0 && std::isfinite(r.ppl_probe) &&
                std::isfinite(r.ppl_identity),
            ErrorKind::schema, "record " + std::to_string(i) + ": perplexities must be positive");
    require(keys.emplace(r.category, r.stereotype, r.identity).second, ErrorKind::schema,
            "record " + std::to_string(i) + ": duplicate (category, stereotype_id, identity)");
  }
}

SentimentLexicon load_lexicon(const std::filesystem::path& path) {
  const auto t = util::read_tsv(path);
  util::expect_header(t, {"word", "pos", "neg", "neu"}, path);
  SentimentLexicon lex;
  for (const auto& r : t.rows) {
    std::array<double, 3> v{};
    for (int k = 0; k < 3; ++k) v[k] = util::parse_double(r.fields[1 + k], r.line, t.header[1 + k]);
    require(v[0] >= 0 && v[1] >= 0 && v[2] >= 0, ErrorKind::schema,
            at_line(path, r.line) + "negative sentiment mass");
    require(std::abs(v[0] + v[1] + v[2] - 1.0) <= 1e-6, ErrorKind::schema,
            at_line(path, r.line) + "pos+neg+neu must sum to 1");
    require(lex.entries.emplace(r.fields[0], v).second, ErrorKind::schema,
            at_line(path, r.line) + "duplicate word '" + r.fields[0] + "'");
  }
  return lex;
}

CooccurrenceCounts load_counts(const std::filesystem::path& path) {
  const auto t = util::read_tsv(path);
  util::expect_header(t, {"word", "group", "count"}, path);
  std::vector<std::tuple<std::string, std::string, std::uint64_t>> rows;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& r : t.rows) {
    require(!r.fields[0].empty() && !r.fields[1].empty(), ErrorKind::schema,
            at_line(path, r.line) + "empty word or group");
    require(seen.emplace(r.fields[0], r.fields[1]).second, ErrorKind::schema,
            at_line(path, r.line) + "duplicate (word, group) pair");
    rows.emplace_back(r.fields[0], r.fields[1], util::parse_u64(r.fields[2], r.line, "count"));
  }
  require(!rows.empty(), ErrorKind::empty, path.string() + ": no counts");
  return make_counts(rows);
}

EntityCounts load_entity_counts(const std::filesystem::path& path) {
  const auto t = util::read_tsv(path);
  util::expect_header(t, {"word", "entity", "group"}, path);
  EntityCounts ec;
  for (const auto& r : t.rows) {
    auto [it, inserted] = ec.entity_group.emplace(r.fields[1], r.fields[2]);
    require(inserted || it->second == r.fields[2], ErrorKind::schema,
            at_line(path, r.line) + "entity '" + r.fields[1] + "' mapped to two groups");
    ec.presence.emplace(r.fields[0], r.fields[1]);
  }
  return ec;
}

EmbeddingSet load_embeddings(const std::filesystem::path& path) {
  const auto t = util::read_tsv(path);
  require(t.header.size() >= 2 && t.header[0] == "word", ErrorKind::schema,
          path.string() + ": header must be 'word\\tv0\\tv1...'");
  for (std::size_t k = 1; k < t.header.size(); ++k) {
    require(t.header[k] == "v" + std::to_string(k - 1), ErrorKind::schema,
            path.string() + ": header column " + std::to_string(k) + " must be v" +
                std::to_string(k - 1));
  }
  EmbeddingSet e;
  e.dim = t.header.size() - 1;
  for (const auto& r : t.rows) {
    std::vector<double> v(e.dim);
    for (std::size_t k = 0; k < e.dim; ++k) v[k] = util::parse_double(r.fields[k + 1], r.line, t.header[k + 1]);
    require(e.vectors.emplace(r.fields[0], std::move(v)).second, ErrorKind::schema,
            at_line(path, r.line) + "duplicate word '" + r.fields[0] + "'");
  }
  return e;
}

PplTable load_ppl_table(const std::filesystem::path& path) {
  const auto t = util::read_tsv(path);
  util::expect_header(t, {"category", "stereotype_id", "identity", "ppl_probe", "ppl_identity"},
                      path);
  PplTable table;
  std::set<std::tuple<std::string, std::string, std::string>> keys;
  for (const auto& r : t.rows) {
    PplRecord rec{r.fields[0], r.fields[1], r.fields[2],
                  util::parse_double(r.fields[3], r.line, "ppl_probe"),
                  util::parse_double(r.fields[4], r.line, "ppl_identity")};
    require(rec.ppl_probe > 0, ErrorKind::schema, at_line(path, r.line) + "ppl_probe must be > 0");
    require(rec.ppl_identity > 0, ErrorKind::schema,
            at_line(path, r.line) + "ppl_identity must be > 0");
    require(keys.emplace(rec.category, rec.stereotype, rec.identity).second, ErrorKind::schema,
            at_line(path, r.line) + "duplicate (category, stereotype_id, identity)");
    table.records.push_back(std::move(rec));
  }
  return table;
}

}  // namespace latprobe::io
