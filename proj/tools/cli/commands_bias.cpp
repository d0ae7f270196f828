#include <algorithm>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include "command.hpp"
#include "latprobe/bias/association.hpp"
#include "latprobe/bias/causal.hpp"
#include "latprobe/error.hpp"
#include "latprobe/fairness/sofa.hpp"
#include "latprobe/gendered/model.hpp"
#include "latprobe/io/tables.hpp"
#include "latprobe/overlap/overlap.hpp"
#include "latprobe/util/files.hpp"
#include "latprobe/util/tsv.hpp"

namespace latprobe::cli {

namespace {

using util::format_double;

std::vector<std::string> read_words(const std::string& path) {
  std::istringstream in(util::read_file(path));
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::size_t index_of(std::vector<std::string>& inv, const std::string& v) {
  return static_cast<std::size_t>(std::lower_bound(inv.begin(), inv.end(), v) - inv.begin());
}

std::vector<std::string> sorted_unique(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

io::Axis parse_axis(const std::string& s) {
  if (s == "pos") return io::Axis::pos;
  if (s == "neg") return io::Axis::neg;
  if (s == "neu") return io::Axis::neu;
  fail(ErrorKind::domain, "unknown lexicon axis '" + s + "' (expected pos, neg or neu)");
}

class Overlap : public Command {
 public:
  explicit Overlap(CLI::App& app) : Command(app, "overlap", "Pairwise top-k overlap of selections with Holm-corrected p-values") {
    required("runs", runs_, "selection.tsv files, one per run");
    required("universe", universe_, "number of dimensions |D|");
    key("k", k_, "top-k prefix of each selection");
    key("alpha", alpha_, "family-wise error rate");
    key("method", method_, "exact or permutation");
    key("n_perm", n_perm_, "subset pairs for the permutation method");
    key("seed", seed_, "master seed");
    key("jobs", jobs_, "threads over pairs");
    inputs({"runs"});
    action = [this] {
      require(runs_.size() >= 2, ErrorKind::domain, "overlap needs at least two runs");
      overlap::PvalueConfig pc;
      if (method_ == "permutation") {
        pc.method = overlap::PvalueMethod::permutation;
      } else {
        require(method_ == "exact", ErrorKind::domain, "unknown p-value method '" + method_ + "'");
      }
      pc.n_perm = n_perm_;
      pc.seed = seed_;
      std::vector<overlap::RunSelection> runs;
      for (const auto& path : runs_) {
        const auto t = util::read_tsv(path);
        util::expect_header(t, {"step", "dim"}, path, true);
        overlap::RunSelection r{path, universe_, {}};
        for (const auto& row : t.rows) {
          const auto d = util::parse_u64(row.fields[1], row.line, "dim");
          require(d < universe_, ErrorKind::domain, path + ": dimension " + std::to_string(d) + " outside the universe");
          r.dims.push_back(static_cast<std::size_t>(d));
        }
        runs.push_back(std::move(r));
      }
      const auto res = overlap::overlap_matrix(runs, k_, alpha_, pc, jobs_);
      write("overlap.tsv", overlap::format_overlap(runs, res));
    };
  }

 private:
  std::vector<std::string> runs_;
  std::size_t universe_ = 0;
  std::size_t k_ = 50;
  double alpha_ = 0.05;
  std::string method_ = "exact";
  std::size_t n_perm_ = 10000;
  std::uint64_t seed_ = 0;
  std::size_t jobs_ = 1;
};

class Pmi : public Command {
 public:
  explicit Pmi(CLI::App& app) : Command(app, "pmi", "Word-group PMI from co-occurrence counts") {
    required("counts", counts_, "counts TSV (word, group, count)");
    key("min_count", min_count_, "drop words below this count in any group");
    key("smoothing", smoothing_, "pseudo-count added to every cell");
    inputs({"counts"});
    action = [this] {
      write("pmi.tsv", bias::format_pmi(bias::pmi(io::load_counts(counts_), min_count_, smoothing_)));
    };
  }

 private:
  std::string counts_;
  std::uint64_t min_count_ = 3;
  double smoothing_ = 0.0;
};

class PmiEntity : public Command {
 public:
  explicit PmiEntity(CLI::App& app) : Command(app, "pmie", "Entity-level PMI from word presence per entity") {
    required("entities", entities_, "entity TSV (word, entity, group)");
    key("min_count", min_count_, "drop words present in fewer entities of some group");
    inputs({"entities"});
    action = [this] {
      write("pmie.tsv", bias::format_pmi(bias::pmi_entity(io::load_entity_counts(entities_), min_count_)));
    };
  }

 private:
  std::string entities_;
  std::uint64_t min_count_ = 0;
};

class Weat : public Command {
 public:
  explicit Weat(CLI::App& app) : Command(app, "weat", "WEAT statistic, effect size and permutation p-value") {
    required("embeddings", embeddings_, "embedding TSV (word, v1..vd)");
    required("x", sets_.x, "target words X");
    required("y", sets_.y, "target words Y");
    required("a", sets_.a, "attribute words A");
    required("b", sets_.b, "attribute words B");
    key("n_perm", n_perm_, "re-partitions for the p-value (0 skips it)");
    key("seed", seed_, "master seed");
    key("jobs", jobs_, "threads over replicas");
    inputs({"embeddings"});
    action = [this] {
      const auto e = io::load_embeddings(embeddings_);
      const auto r = bias::weat(e, sets_);
      const std::string p = n_perm_ == 0 ? "nan" : format_double(bias::weat_pvalue(e, sets_, n_perm_, seed_, jobs_));
      write("weat.tsv", "statistic\teffect_size\tp_value\tn_perm\n" + format_double(r.statistic) + '\t' +
                            format_double(r.effect_size) + '\t' + p + '\t' + std::to_string(n_perm_) + '\n');
    };
  }

 private:
  std::string embeddings_;
  bias::WeatSets sets_;
  std::size_t n_perm_ = 10000;
  std::uint64_t seed_ = 0;
  std::size_t jobs_ = 1;
};

class Lexicon : public Command {
 public:
  explicit Lexicon(CLI::App& app) : Command(app, "lexicon", "Mean lexicon score of a token stream") {
    required("lexicon", lexicon_, "lexicon TSV (word, pos, neg, neu)");
    required("tokens", tokens_, "whitespace-separated token file");
    key("axis", axis_, "pos, neg or neu");
    inputs({"lexicon", "tokens"});
    action = [this] {
      const auto s = bias::lexicon_mean_score(read_words(tokens_), io::load_lexicon(lexicon_), parse_axis(axis_));
      write("lexicon.tsv", "axis\tscore\tcoverage\n" + axis_ + '\t' + format_double(s.score) + '\t' +
                               format_double(s.coverage) + '\n');
    };
  }

 private:
  std::string lexicon_, tokens_;
  std::string axis_ = "pos";
};

class Honest : public Command {
 public:
  explicit Honest(CLI::App& app) : Command(app, "honest", "Share of hurtful completions") {
    required("completions", completions_, "completion TSV (template, completion)");
    required("hurt", hurt_, "whitespace-separated hurtful word list");
    inputs({"completions", "hurt"});
    action = [this] {
      const auto t = util::read_tsv(completions_);
      util::expect_header(t, {"template", "completion"}, completions_);
      std::vector<std::string> order;
      std::map<std::string, std::vector<std::string>> by_template;
      for (const auto& row : t.rows) {
        auto& v = by_template[row.fields[0]];
        if (v.empty()) order.push_back(row.fields[0]);
        v.push_back(row.fields[1]);
      }
      std::vector<std::vector<std::string>> completions;
      for (const auto& k : order) completions.push_back(by_template[k]);
      const auto words = read_words(hurt_);
      const double s = bias::honest_score(completions, {words.begin(), words.end()});
      write("honest.tsv", "templates\tcompletions_per_template\thonest\n" + std::to_string(completions.size()) + '\t' +
                              std::to_string(completions.empty() ? 0 : completions[0].size()) + '\t' +
                              format_double(s) + '\n');
    };
  }

 private:
  std::string completions_, hurt_;
};

class Jsd : public Command {
 public:
  explicit Jsd(CLI::App& app) : Command(app, "jsd", "Weighted Jensen-Shannon divergence of distributions") {
    required("distributions", distributions_, "TSV (distribution, weight, outcome, prob)");
    inputs({"distributions"});
    action = [this] {
      const auto t = util::read_tsv(distributions_);
      util::expect_header(t, {"distribution", "weight", "outcome", "prob"}, distributions_);
      std::vector<std::string> names, outcomes;
      for (const auto& row : t.rows) {
        names.push_back(row.fields[0]);
        outcomes.push_back(row.fields[2]);
      }
      names = sorted_unique(names);
      outcomes = sorted_unique(outcomes);
      std::vector<std::vector<double>> dists(names.size(), std::vector<double>(outcomes.size(), 0.0));
      std::vector<double> pi(names.size(), -1.0);
      for (const auto& row : t.rows) {
        const auto i = index_of(names, row.fields[0]);
        const double w = util::parse_double(row.fields[1], row.line, "weight");
        require(pi[i] < 0.0 || pi[i] == w, ErrorKind::schema,
                distributions_ + ": line " + std::to_string(row.line) + ": inconsistent weight for '" + row.fields[0] + "'");
        pi[i] = w;
        dists[i][index_of(outcomes, row.fields[2])] += util::parse_double(row.fields[3], row.line, "prob");
      }
      write("jsd.tsv", "n_distributions\tn_outcomes\tjsd_nats\n" + std::to_string(names.size()) + '\t' +
                           std::to_string(outcomes.size()) + '\t' + format_double(bias::weighted_jsd(dists, pi)) + '\n');
    };
  }

 private:
  std::string distributions_;
};

class MiDo : public Command {
 public:
  explicit MiDo(CLI::App& app) : Command(app, "mido", "Interventional gender-outcome MI with a label-permutation test") {
    required("observations", observations_, "TSV (gender, noun, outcome, count)");
    key("smoothing", smoothing_, "pseudo-count per outcome in every (gender, noun) context");
    key("n_perm", n_perm_, "gender-label permutations (0 skips the test)");
    key("seed", seed_, "master seed");
    key("jobs", jobs_, "threads over permutations");
    inputs({"observations"});
    action = [this] {
      const auto t = util::read_tsv(observations_);
      util::expect_header(t, {"gender", "noun", "outcome", "count"}, observations_);
      std::vector<std::string> gs, ns, as;
      for (const auto& row : t.rows) {
        gs.push_back(row.fields[0]);
        ns.push_back(row.fields[1]);
        as.push_back(row.fields[2]);
      }
      gs = sorted_unique(gs);
      ns = sorted_unique(ns);
      as = sorted_unique(as);
      std::vector<bias::Observation> obs;
      for (const auto& row : t.rows) {
        const bias::Observation o{index_of(gs, row.fields[0]), index_of(ns, row.fields[1]), index_of(as, row.fields[2])};
        const auto c = util::parse_u64(row.fields[3], row.line, "count");
        obs.insert(obs.end(), c, o);
      }
      require(!obs.empty(), ErrorKind::empty, observations_ + ": no observations");
      auto stat = [&](const std::vector<std::size_t>& labels) {
        auto o = obs;
        for (std::size_t i = 0; i < o.size(); ++i) o[i].g = labels[i];
        return bias::mi_do(bias::table_from_observations(o, gs.size(), ns.size(), as.size(), smoothing_));
      };
      std::vector<std::size_t> labels;
      for (const auto& o : obs) labels.push_back(o.g);
      const double v = stat(labels);
      const std::string p =
          n_perm_ == 0 ? "nan" : format_double(bias::label_permutation_test(stat, labels, n_perm_, seed_, jobs_));
      write("mido.tsv", "mi_do_nats\tp_value\tn_perm\n" + format_double(v) + '\t' + p + '\t' + std::to_string(n_perm_) + '\n');
    };
  }

 private:
  std::string observations_;
  double smoothing_ = 1.0;
  std::size_t n_perm_ = 1000;
  std::uint64_t seed_ = 0;
  std::size_t jobs_ = 1;
};

class GenderedModel : public Command {
 public:
  explicit GenderedModel(CLI::App& app)
      : Command(app, "gendered-model", "Fit the gendered word model and rank words by deviation") {
    required("counts", counts_, "counts TSV (word, group, count); groups are genders");
    key("lexicon", lexicon_, "lexicon TSV (word, pos, neg, neu); empty disables the regularizer data");
    key("no_sentiment", no_sentiment_, "collapse to a single sentiment");
    key("alpha", cfg_.alpha, "posterior-regularizer weight");
    key("beta", cfg_.beta, "L1 weight");
    key("learning_rate", cfg_.learning_rate, "Adam learning rate");
    key("max_epochs", cfg_.max_epochs, "epoch limit");
    key("patience", cfg_.patience, "epochs without improvement before stopping");
    key("tol", cfg_.tol, "objective gain that resets patience");
    key("learn_background", cfg_.learn_background, "learn the background log-frequencies");
    key("seed", cfg_.seed, "master seed");
    key("top_n", top_n_, "words per (gender, sentiment) ranking");
    key("grid", grid_, "train the alpha x beta grid and average rankings");
    key("alphas", alphas_, "grid values for alpha");
    key("betas", betas_, "grid values for beta");
    key("jobs", jobs_, "threads over grid cells");
    inputs({"counts", "lexicon"});
    action = [this] {
      const auto counts = io::load_counts(counts_);
      io::SentimentLexicon lex;
      if (!lexicon_.empty()) lex = io::load_lexicon(lexicon_);
      const auto data = gendered::make_data(counts, lexicon_.empty() ? nullptr : &lex, !no_sentiment_);
      if (grid_) {
        const auto cells = gendered::train_grid(data, cfg_, alphas_, betas_, jobs_);
        write("rankings.tsv", gendered::format_averaged_rankings(cells, top_n_));
        return;
      }
      const auto tg = gendered::train_gendered_model(data, cfg_);
      std::string log = "epoch\tobjective\n";
      for (std::size_t i = 0; i < tg.log.size(); ++i) log += std::to_string(i) + '\t' + format_double(tg.log[i]) + '\n';
      write("training_log.tsv", log);
      write("rankings.tsv", gendered::format_rankings(tg.params, top_n_));
    };
  }

 private:
  std::string counts_, lexicon_;
  bool no_sentiment_ = false;
  gendered::GenderedObjectiveConfig cfg_;
  std::size_t top_n_ = 25;
  bool grid_ = false;
  std::vector<double> alphas_ = gendered::alpha_grid();
  std::vector<double> betas_ = gendered::beta_grid();
  std::size_t jobs_ = 1;
};

json stats_json(const fairness::StereotypeStats& s) {
  return {{"category", s.category},   {"stereotype_id", s.stereotype}, {"n_identities", s.n_identities},
          {"variance", s.variance},   {"dds", s.dds},                  {"argmin_identity", s.argmin_identity}};
}

class Sofa : public Command {
 public:
  explicit Sofa(CLI::App& app) : Command(app, "sofa", "Perplexity-based fairness report") {
    required("ppl", ppl_, "PPL TSV (category, stereotype_id, identity, ppl_probe, ppl_identity)");
    key("top_n", top_n_, "lowest-DDS stereotypes listed per category");
    inputs({"ppl"});
    action = [this] {
      const auto r = fairness::sofa_score(io::load_ppl_table(ppl_), top_n_);
      json j;
      j["sofa"] = r.sofa;
      j["categories"] = json::array();
      for (const auto& c : r.categories) {
        j["categories"].push_back({{"category", c.category}, {"score", c.score}, {"lowest_dds", c.lowest_dds}});
      }
      j["stereotypes"] = json::array();
      for (const auto& s : r.stereotypes) j["stereotypes"].push_back(stats_json(s));
      j["skipped"] = json::array();
      for (const auto& [c, s] : r.skipped) j["skipped"].push_back({{"category", c}, {"stereotype_id", s}});
      j["warnings"] = r.warnings;
      write("sofa.json", j.dump(2) + "\n");
      write("sofa.tsv", fairness::format_report_tsv(r));
    };
  }

 private:
  std::string ppl_;
  std::size_t top_n_ = 5;
};

}  // namespace

std::vector<std::unique_ptr<Command>> register_bias_commands(CLI::App& app) {
  std::vector<std::unique_ptr<Command>> v;
  v.push_back(std::make_unique<Overlap>(app));
  CLI::App* bias = app.add_subcommand("bias", "Association and causal bias measures");
  bias->require_subcommand(1);
  v.push_back(std::make_unique<Pmi>(*bias));
  v.push_back(std::make_unique<PmiEntity>(*bias));
  v.push_back(std::make_unique<Weat>(*bias));
  v.push_back(std::make_unique<Lexicon>(*bias));
  v.push_back(std::make_unique<Honest>(*bias));
  v.push_back(std::make_unique<Jsd>(*bias));
  v.push_back(std::make_unique<MiDo>(*bias));
  v.push_back(std::make_unique<GenderedModel>(app));
  v.push_back(std::make_unique<Sofa>(app));
  return v;
}

}  // namespace latprobe::cli
