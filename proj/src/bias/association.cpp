#include "latprobe/bias/association.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "latprobe/error.hpp"
#include "latprobe/parallel.hpp"
#include "latprobe/rng.hpp"
#include "latprobe/util/tsv.hpp"

namespace latprobe::bias {

PmiTable pmi(const io::CooccurrenceCounts& counts, std::uint64_t min_count, double smoothing) {
  require(smoothing >= 0.0, ErrorKind::domain, "smoothing must be >= 0");
  const std::size_t nw = counts.words.size(), ng = counts.groups.size();
  require(nw > 0 && ng > 0, ErrorKind::empty, "count table is empty");
  std::vector<double> cw(nw, 0.0), cg(ng, 0.0);
  double total = 0.0;
  for (std::size_t w = 0; w < nw; ++w) {
    for (std::size_t g = 0; g < ng; ++g) {
      const double c = static_cast<double>(counts.at(w, g)) + smoothing;
      cw[w] += c;
      cg[g] += c;
      total += c;
    }
  }
  require(total > 0.0, ErrorKind::empty, "count table has no mass");
  PmiTable t;
  for (std::size_t w = 0; w < nw; ++w) {
    bool keep = true;
    for (std::size_t g = 0; g < ng; ++g) keep = keep && counts.at(w, g) >= min_count;
    if (!keep) continue;
    for (std::size_t g = 0; g < ng; ++g) {
      const double c = static_cast<double>(counts.at(w, g)) + smoothing;
      if (c == 0.0) {
        t.skipped.emplace_back(counts.words[w], counts.groups[g]);
        continue;
      }
      t.entries.push_back({counts.words[w], counts.groups[g], std::log(c * total / (cw[w] * cg[g]))});
    }
  }
  return t;
}

PmiTable pmi_entity(const io::EntityCounts& ec, std::uint64_t min_count) {
  require(!ec.entity_group.empty(), ErrorKind::empty, "no entities");
  std::map<std::string, std::size_t> group_index;
  for (const auto& [entity, group] : ec.entity_group) group_index.emplace(group, 0);
  std::vector<std::string> groups;
  for (auto& [g, i] : group_index) {
    i = groups.size();
    groups.push_back(g);
  }
  const std::size_t ng = groups.size();
  std::vector<double> eg(ng, 0.0);
  for (const auto& [entity, group] : ec.entity_group) eg[group_index.at(group)] += 1.0;
  const double total = static_cast<double>(ec.entity_group.size());

  std::map<std::string, std::vector<std::uint64_t>> ewg;
  for (const auto& [word, entity] : ec.presence) {
    auto it = ec.entity_group.find(entity);
    require(it != ec.entity_group.end(), ErrorKind::schema, "entity '" + entity + "' has no group");
    auto& row = ewg[word];
    row.resize(ng, 0);
    ++row[group_index.at(it->second)];
  }
  PmiTable t;
  for (const auto& [word, row] : ewg) {
    if (std::any_of(row.begin(), row.end(), [&](std::uint64_t c) { return c < min_count; })) continue;
    const double ew = static_cast<double>(std::accumulate(row.begin(), row.end(), std::uint64_t{0}));
    for (std::size_t g = 0; g < ng; ++g) {
      if (row[g] == 0) {
        t.skipped.emplace_back(word, groups[g]);
        continue;
      }
      t.entries.push_back({word, groups[g], std::log(static_cast<double>(row[g]) * total / (ew * eg[g]))});
    }
  }
  return t;
}

std::string format_pmi(const PmiTable& t) {
  std::string s = "word\tgroup\tpmi\n";
  for (const auto& e : t.entries) s += e.word + '\t' + e.group + '\t' + util::format_double(e.value) + '\n';
  return s;
}

namespace {

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

const std::vector<double>& vector_of(const io::EmbeddingSet& e, const std::string& w) {
  const auto& v = e.at(w);
  require(norm(v) > 0.0, ErrorKind::domain, "zero-norm embedding for '" + w + "'");
  return v;
}

double cosine(const std::vector<double>& u, const std::vector<double>& v) {
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) d += u[i] * v[i];
  return d / (norm(u) * norm(v));
}

// s(w) for X then Y, in list order.
std::vector<double> association_scores(const io::EmbeddingSet& e, const WeatSets& sets) {
  require(sets.x.size() == sets.y.size() && !sets.x.empty(), ErrorKind::domain,
          "WEAT needs |X| = |Y| >= 1");
  require(!sets.a.empty() && !sets.b.empty(), ErrorKind::domain, "WEAT attribute sets must be non-empty");
  auto s = [&](const std::string& w) {
    const auto& v = vector_of(e, w);
    double sa = 0.0, sb = 0.0;
    for (const auto& a : sets.a) sa += cosine(v, vector_of(e, a));
    for (const auto& b : sets.b) sb += cosine(v, vector_of(e, b));
    return sa / static_cast<double>(sets.a.size()) - sb / static_cast<double>(sets.b.size());
  };
  std::vector<double> out;
  for (const auto& w : sets.x) out.push_back(s(w));
  for (const auto& w : sets.y) out.push_back(s(w));
  return out;
}

}  // namespace

WeatResult weat(const io::EmbeddingSet& e, const WeatSets& sets) {
  const auto s = association_scores(e, sets);
  const std::size_t n = sets.x.size();
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += s[i];
    sy += s[n + i];
  }
  const double mean = (sx + sy) / static_cast<double>(2 * n);
  double var = 0.0;
  for (double v : s) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(2 * n));
  require(sd > 0.0, ErrorKind::undefined, "WEAT effect size is undefined: zero standard deviation");
  WeatResult r;
  r.statistic = sx - sy;
  r.effect_size = (sx / static_cast<double>(n) - sy / static_cast<double>(n)) / sd;
  return r;
}

double weat_pvalue(const io::EmbeddingSet& e, const WeatSets& sets, std::size_t n_perm,
                   std::uint64_t seed, std::size_t jobs) {
  require(n_perm >= 1, ErrorKind::domain, "n_perm must be positive");
  const auto s = association_scores(e, sets);
  const std::size_t n = sets.x.size();
  // S = 2 sum_X s - sum_all s, so sum_X s (in index order) orders partitions.
  auto stat = [&](const std::vector<std::size_t>& idx) {
    std::vector<std::size_t> xs(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n));
    std::sort(xs.begin(), xs.end());
    double t = 0.0;
    for (std::size_t i : xs) t += s[i];
    return t;
  };
  std::vector<std::size_t> base(2 * n);
  std::iota(base.begin(), base.end(), 0);
  const double observed = stat(base);
  std::vector<char> hit(n_perm, 0);
  parallel_for(n_perm, jobs, [&](std::size_t r) {
    Rng rng(derive_seed(seed, r));
    auto idx = base;
    rng.shuffle(idx.begin(), idx.end());
    hit[r] = stat(idx) >= observed;
  });
  const auto count = static_cast<double>(std::count(hit.begin(), hit.end(), 1));
  return (1.0 + count) / (static_cast<double>(n_perm) + 1.0);
}

LexiconScore lexicon_mean_score(const std::vector<std::string>& tokens,
                                const io::SentimentLexicon& lex, io::Axis axis) {
  double sum = 0.0;
  std::size_t matched = 0;
  for (const auto& t : tokens) {
    auto it = lex.entries.find(t);
    if (it == lex.entries.end()) continue;
    sum += it->second[static_cast<std::size_t>(axis)];
    ++matched;
  }
  require(matched > 0, ErrorKind::undefined, "no token is covered by the lexicon");
  return {sum / static_cast<double>(matched),
          static_cast<double>(matched) / static_cast<double>(tokens.size())};
}

double honest_score(const std::vector<std::vector<std::string>>& completions,
                    const std::set<std::string>& hurt) {
  require(!completions.empty(), ErrorKind::domain, "no templates");
  const std::size_t k = completions.front().size();
  require(k > 0, ErrorKind::domain, "templates have no completions");
  std::size_t hits = 0;
  for (const auto& c : completions) {
    require(c.size() == k, ErrorKind::domain, "every template needs the same number of completions");
    for (const auto& w : c) hits += hurt.count(w);
  }
  return static_cast<double>(hits) / static_cast<double>(completions.size() * k);
}

}  // namespace latprobe::bias
