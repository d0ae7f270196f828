#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <sstream>

#include "cli.hpp"
#include "latprobe/io/dataset.hpp"
#include "latprobe/util/files.hpp"
#include "latprobe/util/tsv.hpp"
#include "synth.hpp"
#include "test_util.hpp"

using namespace latprobe;
using testutil::TempDir;
using testutil::write_text;

namespace {

struct Result {
  int code = 0;
  std::string out, err;
};

Result invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Result r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string read(const std::filesystem::path& p) { return util::read_file(p); }

// Second line, column `col` of a one-row TSV.
double cell(const std::filesystem::path& p, std::size_t col) {
  const auto t = util::read_tsv(p);
  REQUIRE(t.rows.size() == 1);
  return util::parse_double(t.rows[0].fields[col], 2, "cell");
}

void write_planted(const TempDir& dir) {
  const auto pd = synth::planted_dataset(5, 300, 6, 2);
  io::write_representations(pd.ds, dir / "m.fprb", dir / "labels.tsv");
}

void write_weat_fixture(const TempDir& dir) {
  write_text(dir / "emb.tsv", "word\tv0\tv1\nx1\t1\t0\nx2\t2\t0\ny1\t0\t1\ny2\t0\t3\na\t1\t0\nb\t0\t1\n");
}

}  // namespace

TEST_CASE("validate on an FPRB fixture") {
  TempDir dir;
  const auto ds = io::make_dataset(2, {1, 2, 3, 4, 5, 6}, {"x", "y", "x"}, {"p", "q", "r"});
  io::write_representations(ds, dir / "m.fprb", dir / "labels.tsv");
  const auto r = invoke({"validate", "--matrix", (dir / "m.fprb").string(), "--labels", (dir / "labels.tsv").string(),
                      "--out", (dir / "o").string()});
  CHECK(r.code == 0);
  CHECK(r.err.empty());
  CHECK(read(dir / "o" / "validation.tsv") == "n_rows\tdim\tn_classes\ttrain\tdev\ttest\n3\t2\t2\t0\t0\t0\n");
  CHECK(std::filesystem::exists(dir / "o" / "config.json"));
  const auto prov = read(dir / "o" / "provenance.tsv");
  CHECK(prov.rfind("key\tpath\tfnv1a64\tbytes\nmatrix\t", 0) == 0);
  CHECK(prov.find("\nlabels\t") != std::string::npos);
}

TEST_CASE("bias weat reports the hand-computed statistic and effect size") {
  TempDir dir;
  write_weat_fixture(dir);
  const auto r = invoke({"bias", "weat", "--embeddings", (dir / "emb.tsv").string(), "--x", "x1,x2", "--y", "y1,y2",
                      "--a", "a", "--b", "b", "--n_perm", "0", "--out", (dir / "o").string()});
  REQUIRE(r.code == 0);
  // s(x) = 1, s(y) = -1: S = 4, d = 2
  CHECK(std::abs(cell(dir / "o" / "weat.tsv", 0) - 4.0) <= 1e-12);
  CHECK(std::abs(cell(dir / "o" / "weat.tsv", 1) - 2.0) <= 1e-12);
}

TEST_CASE("sofa writes the hand-computed report") {
  TempDir dir;
  // stereotype variances 1 and 3 in one category
  const double r3 = std::pow(10.0, 2.0 * std::sqrt(3.0));
  write_text(dir / "ppl.tsv", "category\tstereotype_id\tidentity\tppl_probe\tppl_identity\n"
                              "gender\ts1\ta\t1\t1\ngender\ts1\tb\t100\t1\n"
                              "gender\ts2\ta\t1\t1\ngender\ts2\tb\t" +
                                  util::format_double(r3) + "\t1\nreligion\ts9\ta\t4\t1\n");
  const auto r = invoke({"sofa", "--ppl", (dir / "ppl.tsv").string(), "--out", (dir / "o").string()});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(read(dir / "o" / "sofa.json"));
  CHECK(std::abs(j["sofa"].get<double>() - 2.0) <= 1e-12);
  CHECK(j["categories"].size() == 1);
  CHECK(j["skipped"].size() == 1);
  CHECK(j["warnings"].size() == 1);
  CHECK(read(dir / "o" / "sofa.tsv").rfind("category\tstereotype_id\tvariance\tdds\targmin_identity\n", 0) == 0);
}

TEST_CASE("config files, overrides and errors") {
  TempDir dir;
  write_text(dir / "counts.tsv", "word\tgroup\tcount\nw\tF\t6\nw\tM\t2\nv\tF\t2\nv\tM\t6\n");
  const std::string counts = (dir / "counts.tsv").string();

  SUBCASE("config values apply and flags override them") {
    write_text(dir / "c.json", "{\"command\": \"pmi\", \"counts\": \"" + counts + "\", \"min_count\": 100, \"out\": \"" +
                                   (dir / "o").string() + "\"}");
    REQUIRE(invoke({"bias", "pmi", "--config", (dir / "c.json").string()}).code == 0);
    CHECK(read(dir / "o" / "pmi.tsv") == "word\tgroup\tpmi\n");
    REQUIRE(invoke({"bias", "pmi", "--config", (dir / "c.json").string(), "--min_count", "0"}).code == 0);
    const auto snap = nlohmann::json::parse(read(dir / "o" / "config.json"));
    CHECK(snap["min_count"] == 0);
    CHECK(snap["command"] == "pmi");
    // p(v, F) = 2/16 and p(v, M) = 6/16 against p(v) = p(g) = 1/2
    const auto t = util::read_tsv(dir / "o" / "pmi.tsv");
    REQUIRE(t.rows.size() == 4);
    CHECK(t.rows[0].fields[0] == "v");
    CHECK(std::abs(util::parse_double(t.rows[0].fields[2], 0, "") - std::log(0.5)) <= 1e-12);
    CHECK(std::abs(util::parse_double(t.rows[1].fields[2], 0, "") - std::log(1.5)) <= 1e-12);
  }
  SUBCASE("unknown config key") {
    write_text(dir / "c.json", "{\"counts\": \"" + counts + "\", \"min_cuont\": 1, \"out\": \"" + (dir / "o").string() + "\"}");
    const auto r = invoke({"bias", "pmi", "--config", (dir / "c.json").string()});
    CHECK(r.code == 2);
    CHECK(r.err.rfind("error: schema", 0) == 0);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
  }
  SUBCASE("config for another command") {
    write_text(dir / "c.json", "{\"command\": \"weat\"}");
    CHECK(invoke({"bias", "pmi", "--config", (dir / "c.json").string(), "--counts", counts, "--out", "x"}).code == 2);
  }
  SUBCASE("missing required key") {
    const auto r = invoke({"bias", "pmi", "--out", (dir / "o").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("counts") != std::string::npos);
  }
  SUBCASE("bad input file and bad flags") {
    write_text(dir / "bad.tsv", "word\tgrp\tcount\n");
    CHECK(invoke({"bias", "pmi", "--counts", (dir / "bad.tsv").string(), "--out", (dir / "o").string()}).code == 2);
    CHECK(invoke({"bias", "pmi", "--counts", counts, "--min_count", "abc", "--out", "o"}).code == 2);
    CHECK(invoke({"nope"}).code == 2);
    CHECK(invoke({}).code == 2);
    CHECK(invoke({"--help"}).code == 0);
  }
}

TEST_CASE("probe pipeline runs end to end and reruns byte-identically") {
  TempDir dir;
  write_planted(dir);
  const std::vector<std::string> data{"--matrix", (dir / "m.fprb").string(), "--labels", (dir / "labels.tsv").string()};
  auto with = [&](std::vector<std::string> head, std::vector<std::string> tail) {
    head.insert(head.end(), data.begin(), data.end());
    head.insert(head.end(), tail.begin(), tail.end());
    return head;
  };
  const std::vector<std::string> files{"t/probe.ckpt",    "t/training_log.tsv", "t/train_summary.tsv",
                                       "t/config.json",   "s/selection.tsv",    "e/metrics.tsv",
                                       "g/selection.tsv", "o/overlap.tsv",      "o/provenance.tsv"};
  std::vector<std::string> first;
  for (int pass = 0; pass < 2; ++pass) {
    const auto out = (dir / "a").string();
    REQUIRE(invoke(with({"train-probe"}, {"--max_epochs", "30", "--learning_rate", "0.01", "--seed", "3", "--out", out + "/t"}))
                .code == 0);
    REQUIRE(invoke(with({"select"}, {"--checkpoint", out + "/t/probe.ckpt", "--k_max", "3", "--out", out + "/s"})).code == 0);
    REQUIRE(invoke(with({"evaluate"}, {"--checkpoint", out + "/t/probe.ckpt", "--dims", "0,1", "--upper_bound",
                                    "--max_epochs", "20", "--out", out + "/e"}))
                .code == 0);
    REQUIRE(invoke(with({"select"}, {"--scorer", "gaussian", "--k_max", "3", "--out", out + "/g"})).code == 0);
    REQUIRE(invoke({"overlap", "--runs", out + "/s/selection.tsv," + out + "/g/selection.tsv", "--universe", "6", "--k",
                 "3", "--method", "permutation", "--n_perm", "500", "--out", out + "/o"})
                .code == 0);
    for (std::size_t i = 0; i < files.size(); ++i) {
      const auto bytes = read(dir / "a" / files[i]);
      if (pass == 0) {
        first.push_back(bytes);
        std::filesystem::remove(dir / "a" / files[i]);
      } else {
        CAPTURE(files[i]);
        CHECK(bytes == first[i]);
      }
    }
  }
  CHECK(util::read_tsv(dir / "a" / "s" / "selection.tsv").rows.size() == 3);
  CHECK(util::read_tsv(dir / "a" / "e" / "metrics.tsv").rows.size() == 2);
  CHECK(util::read_tsv(dir / "a" / "o" / "overlap.tsv").rows.size() == 2);
}

TEST_CASE("permutation and grid commands do not depend on the thread count") {
  TempDir dir;
  write_weat_fixture(dir);
  write_text(dir / "obs.tsv", "gender\tnoun\toutcome\tcount\nf\tn1\tgood\t5\nf\tn1\tbad\t1\nm\tn1\tgood\t2\n"
                              "m\tn1\tbad\t4\nf\tn2\tgood\t3\nm\tn2\tbad\t3\n");
  write_text(dir / "counts.tsv", "word\tgroup\tcount\nw\tF\t6\nw\tM\t2\nv\tF\t2\nv\tM\t6\nu\tF\t3\nu\tM\t3\n");
  write_text(dir / "lex.tsv", "word\tpos\tneg\tneu\nw\t1\t0\t0\nv\t0\t1\t0\n");
  for (const std::string jobs : {"1", "3"}) {
    const auto out = (dir / ("j" + jobs)).string();
    REQUIRE(invoke({"bias", "weat", "--embeddings", (dir / "emb.tsv").string(), "--x", "x1,x2", "--y", "y1,y2", "--a", "a",
                 "--b", "b", "--n_perm", "200", "--seed", "9", "--jobs", jobs, "--out", out + "/w"})
                .code == 0);
    REQUIRE(invoke({"bias", "mido", "--observations", (dir / "obs.tsv").string(), "--n_perm", "200", "--seed", "9",
                 "--jobs", jobs, "--out", out + "/m"})
                .code == 0);
    REQUIRE(invoke({"gendered-model", "--counts", (dir / "counts.tsv").string(), "--lexicon", (dir / "lex.tsv").string(),
                 "--grid", "--alphas", "0,1", "--betas", "0,0.01", "--max_epochs", "200", "--top_n", "2", "--jobs",
                 jobs, "--out", out + "/g"})
                .code == 0);
  }
  for (const std::string f : {"w/weat.tsv", "m/mido.tsv", "g/rankings.tsv"}) {
    CAPTURE(f);
    CHECK(read(dir / "j1" / f) == read(dir / "j3" / f));
  }
  // the 4 equal-size partitions of {x1, x2, y1, y2} that reach S = 4 are only the observed one
  const double p = cell(dir / "j1" / "w" / "weat.tsv", 2);
  CHECK(p > 0.0);
  CHECK(p < 0.35);
}
