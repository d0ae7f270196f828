#pragma once

// Latent-sentiment model of word choice given gender:
//
//   p(w, s, g) = p(w | s, g) p(s | g) p(g)
//   p(w | s, g) ∝ exp(m_w + eta_{w,s,g}),  p(s | g) ∝ exp(sigma_{s,g}),  p(g) ∝ exp(phi_g)
//
// fitted by cross-entropy against empirical (word, gender) frequencies, a KL
// pull of p(s | w) toward a lexicon q(s | w), and an L1 penalty.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "latprobe/bias/causal.hpp"
#include "latprobe/io/tables.hpp"

namespace latprobe::gendered {

/// Sentiment inventory in lexicographic order.
std::vector<std::string> sentiment_inventory();

struct GenderedModelParams {
  std::vector<std::string> words, sentiments, genders;
  std::vector<double> m;      // W
  std::vector<double> eta;    // W x S x G, index (w * S + s) * G + g
  std::vector<double> sigma;  // S x G
  std::vector<double> phi_g;  // G

  std::size_t n_words() const { return words.size(); }
  std::size_t n_sent() const { return sentiments.size(); }
  std::size_t n_genders() const { return genders.size(); }
  double eta_at(std::size_t w, std::size_t s, std::size_t g) const {
    return eta[(w * n_sent() + s) * n_genders() + g];
  }
  void validate() const;
};

GenderedModelParams zero_params(std::vector<std::string> words, std::vector<std::string> sentiments,
                                std::vector<std::string> genders);

/// softmax_w(m_w + eta_{w,s,g}).
std::vector<double> word_given_sent_gender(const GenderedModelParams& p, std::size_t s, std::size_t g);
/// p(w, g) = sum_s p(w | s, g) p(s | g) p(g), as a W x G joint.
bias::DiscreteJoint marginal_word_gender(const GenderedModelParams& p);
/// p(s | w) by Bayes' rule over the marginalized genders.
std::vector<double> sentiment_posterior(const GenderedModelParams& p, std::size_t w);

/// Empirical (word, gender) frequencies and lexicon targets aligned to W and S.
struct GenderedData {
  std::vector<std::string> words, sentiments, genders;
  std::vector<double> p_emp;    // W x G, sums to 1
  std::vector<double> q;        // W x S, rows of uncovered words are unused
  std::vector<bool> covered;    // word has a lexicon entry
};

/// With `with_sentiment` false the model has a single sentiment and no lexicon.
GenderedData make_data(const io::CooccurrenceCounts& counts, const io::SentimentLexicon* lex,
                       bool with_sentiment = true);

struct GenderedObjectiveConfig {
  double alpha = 0.0;  // posterior-regularizer weight
  double beta = 0.0;   // L1 weight
  double learning_rate = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t max_epochs = 3000;
  std::size_t patience = 200;  // epochs without a tol-sized objective gain
  double tol = 1e-10;
  bool learn_background = false;  // m fixed to log empirical word frequencies
  std::uint64_t seed = 0;

  void validate() const;
};

/// Grid values: posterior-regularizer weights and L1 weights.
std::vector<double> alpha_grid();
std::vector<double> beta_grid();

struct ObjectiveTerms {
  double cross_entropy = 0.0;
  double kl = 0.0;  // summed over covered words
  double l1 = 0.0;  // |eta| + |sigma| + |phi|
  double total = 0.0;
};

ObjectiveTerms objective(const GenderedModelParams& p, const GenderedData& data,
                         const GenderedObjectiveConfig& cfg);

/// Objective plus its (sub)gradient, returned in the shape of the parameters.
ObjectiveTerms objective_gradient(const GenderedModelParams& p, const GenderedData& data,
                                  const GenderedObjectiveConfig& cfg, GenderedModelParams& grad);

struct TrainedGendered {
  GenderedModelParams params;
  std::vector<double> log;  // objective per epoch
  std::size_t best_epoch = 0;
};

TrainedGendered train_gendered_model(const GenderedData& data, const GenderedObjectiveConfig& cfg);

struct RankedWord {
  std::string word;
  double score = 0.0;
};

struct Ranking {
  std::vector<RankedWord> words;
  bool clipped = false;  // top_n exceeded |W|
};

/// Words by eta_{w,s,g} descending, ties by word.
Ranking deviation_ranking(const GenderedModelParams& p, std::size_t g, std::size_t s, std::size_t top_n);

/// `gender  sentiment  rank  word  deviation` for every (g, s).
std::string format_rankings(const GenderedModelParams& p, std::size_t top_n);

struct GridCell {
  double alpha = 0.0;
  double beta = 0.0;
  GenderedModelParams params;
};

/// Trains every (alpha, beta) cell; cells run on `jobs` threads.
std::vector<GridCell> train_grid(const GenderedData& data, const GenderedObjectiveConfig& base,
                                 const std::vector<double>& alphas, const std::vector<double>& betas,
                                 std::size_t jobs = 1);

/// Per (g, s), words ordered by mean reciprocal rank over the cells (ties by
/// word); the deviation column is the mean eta over cells.
std::string format_averaged_rankings(const std::vector<GridCell>& cells, std::size_t top_n);

}  // namespace latprobe::gendered
