#include <doctest.h>

#include <cmath>

#include "latprobe/error.hpp"
#include "latprobe/fairness/sofa.hpp"
#include "test_util.hpp"

using namespace latprobe;
using namespace latprobe::fairness;
using io::PplRecord;
using testutil::error_kind_of;

namespace {

io::PplTable random_table(Rng& rng) {
  io::PplTable t;
  const std::vector<std::string> cats{"disability", "gender", "nationality", "religion"};
  for (std::size_t c = 0; c < 1 + rng.index(4); ++c) {
    for (std::size_t s = 0; s < 1 + rng.index(5); ++s) {
      for (std::size_t i = 0; i < 2 + rng.index(4); ++i) {
        t.records.push_back({cats[c], "s" + std::to_string(s), "id" + std::to_string(i), std::exp(rng.uniform(0, 6)),
                             std::exp(rng.uniform(0, 6))});
      }
    }
  }
  return t;
}

}  // namespace

TEST_CASE("perplexity from token log-likelihoods") {
  const std::vector<double> quarter(5, -std::log(4.0));
  CHECK(std::abs(ppl_from_token_loglikes(quarter) - 4.0) <= 1e-14);
  CHECK(ppl_from_token_loglikes(std::vector<double>{0.0}) == 1.0);
  CHECK(std::abs(ppl_from_token_loglikes(std::vector<double>{-std::log(2.0), -std::log(8.0)}) - 4.0) <= 1e-14);
  CHECK(error_kind_of([] { ppl_from_token_loglikes(std::vector<double>{}); }) == ErrorKind::domain);
}

TEST_CASE("normalized perplexity, variance and DDS by hand") {
  CHECK(normalized_ppl({"c", "s", "i", 8, 2}) == 4.0);
  CHECK(normalized_ppl({"c", "s", "i", 3, 3}) == 1.0);
  const std::vector<PplRecord> same{{"c", "s", "a", 5, 1}, {"c", "s", "b", 5, 1}};
  CHECK(stereotype_variance(same) == 0.0);
  CHECK(dds(same) == 0.0);
  const std::vector<PplRecord> spread{{"c", "s", "a", 1, 1}, {"c", "s", "b", 100, 1}};
  CHECK(std::abs(stereotype_variance(spread) - 1.0) <= 1e-15);
  CHECK(std::abs(dds(spread) - 2.0) <= 1e-15);
  auto mid = spread;
  mid.push_back({"c", "s", "m", 10, 1});
  CHECK(dds(mid) == dds(spread));
  CHECK(error_kind_of([] { stereotype_variance({{"c", "s", "a", 1, 1}}); }) == ErrorKind::domain);
  CHECK(error_kind_of([] { dds({{"c", "s", "a", 1, 1}}); }) == ErrorKind::domain);
}

TEST_CASE("scores do not depend on a common scale factor") {
  Rng rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    const auto t = random_table(rng);
    const double k = std::exp(rng.uniform(-5, 5));
    auto tp = t, ti = t;
    for (auto& r : tp.records) r.ppl_probe *= k;
    for (auto& r : ti.records) r.ppl_identity *= k;
    const auto a = sofa_score(t), b = sofa_score(tp), c = sofa_score(ti);
    CHECK(std::abs(a.sofa - b.sofa) <= 1e-12);
    CHECK(std::abs(a.sofa - c.sofa) <= 1e-12);
    for (std::size_t i = 0; i < a.stereotypes.size(); ++i) {
      CHECK(std::abs(a.stereotypes[i].variance - b.stereotypes[i].variance) <= 1e-12);
      CHECK(std::abs(a.stereotypes[i].dds - b.stereotypes[i].dds) <= 1e-12);
      CHECK(a.stereotypes[i].argmin_identity == b.stereotypes[i].argmin_identity);
      CHECK(a.stereotypes[i].argmin_identity == c.stereotypes[i].argmin_identity);
    }
    double mean = 0.0;
    for (const auto& cs : a.categories) mean += cs.score;
    CHECK(a.sofa == mean / static_cast<double>(a.categories.size()));
  }
}

TEST_CASE("SoFa aggregation") {
  // one stereotype: SoFa is its variance
  io::PplTable one{{{"religion", "s1", "a", 1, 1}, {"religion", "s1", "b", 100, 1}}};
  CHECK(std::abs(sofa_score(one).sofa - 1.0) <= 1e-15);

  // variances 1 and 3 in one category: ratios (1, 100) and (1, 10^(2 sqrt 3))
  const double r3 = std::pow(10.0, 2.0 * std::sqrt(3.0));
  io::PplTable two{{{"gender", "s1", "a", 1, 1}, {"gender", "s1", "b", 100, 1},
                    {"gender", "s2", "a", 1, 1}, {"gender", "s2", "b", r3, 1}}};
  const auto rep = sofa_score(two);
  REQUIRE(rep.categories.size() == 1);
  CHECK(std::abs(rep.stereotypes[1].variance - 3.0) <= 1e-12);
  CHECK(std::abs(rep.categories[0].score - 2.0) <= 1e-12);
  CHECK(std::abs(rep.sofa - 2.0) <= 1e-12);

  // single-identity stereotypes are skipped; a category with only those is excluded
  io::PplTable mixed = two;
  mixed.records.push_back({"gender", "s3", "a", 4, 1});
  mixed.records.push_back({"religion", "s9", "a", 4, 1});
  const auto m = sofa_score(mixed);
  CHECK(m.skipped.size() == 2);
  CHECK(m.warnings.size() == 1);
  CHECK(m.sofa == rep.sofa);

  io::PplTable four;
  for (const std::string c : {"religion", "gender", "disability", "nationality"}) {
    four.records.push_back({c, "s", "a", 2, 1});
    four.records.push_back({c, "s", "b", 3, 1});
  }
  const auto f = sofa_score(four);
  CHECK(f.categories.size() == 4);
  CHECK(format_report_tsv(f).rfind("category\tstereotype_id\tvariance\tdds\targmin_identity\n", 0) == 0);
}

TEST_CASE("intra rankings") {
  io::PplTable t{{{"c", "s1", "z", 2, 1}, {"c", "s1", "b", 1, 1}, {"c", "s1", "a", 3, 1},
                  {"c", "s2", "x", 5, 5}, {"c", "s2", "y", 7, 7},
                  {"c", "s3", "only", 9, 1}}};
  const auto r = intra_rankings(t, 5);
  CHECK(r.argmin[0].argmin_identity == "b");
  CHECK(r.argmin[1].argmin_identity == "x");     // tie: lexicographic
  CHECK(r.argmin[2].argmin_identity == "only");  // single identity still ranked
  CHECK(r.lowest_dds.at("c") == std::vector<std::string>{"s2", "s1"});
  CHECK(intra_rankings(t, 1).lowest_dds.at("c") == std::vector<std::string>{"s2"});

  // a monotone transform of normalized PPL keeps the argmin
  auto sq = t;
  for (auto& rec : sq.records) rec.ppl_probe = std::pow(rec.ppl_probe / rec.ppl_identity, 3.0) * rec.ppl_identity;
  const auto r2 = intra_rankings(sq, 5);
  for (std::size_t i = 0; i < r.argmin.size(); ++i) CHECK(r2.argmin[i].argmin_identity == r.argmin[i].argmin_identity);
}
