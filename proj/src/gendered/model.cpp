#include "latprobe/gendered/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "latprobe/error.hpp"
#include "latprobe/parallel.hpp"
#include "latprobe/rng.hpp"
#include "latprobe/train/train.hpp"
#include "latprobe/util/tsv.hpp"

namespace latprobe::gendered {

std::vector<std::string> sentiment_inventory() { return {"neg", "neu", "pos"}; }

void GenderedModelParams::validate() const {
  const std::size_t w = n_words(), s = n_sent(), g = n_genders();
  require(w >= 1 && s >= 1 && g >= 1, ErrorKind::domain, "model inventories must be non-empty");
  require(m.size() == w && eta.size() == w * s * g && sigma.size() == s * g && phi_g.size() == g,
          ErrorKind::shape, "model parameter sizes do not match the inventories");
  for (const auto* v : {&m, &eta, &sigma, &phi_g}) {
    for (double x : *v) require(std::isfinite(x), ErrorKind::numeric, "non-finite model parameter");
  }
}

GenderedModelParams zero_params(std::vector<std::string> words, std::vector<std::string> sentiments,
                                std::vector<std::string> genders) {
  GenderedModelParams p;
  p.words = std::move(words);
  p.sentiments = std::move(sentiments);
  p.genders = std::move(genders);
  p.m.assign(p.n_words(), 0.0);
  p.eta.assign(p.n_words() * p.n_sent() * p.n_genders(), 0.0);
  p.sigma.assign(p.n_sent() * p.n_genders(), 0.0);
  p.phi_g.assign(p.n_genders(), 0.0);
  p.validate();
  return p;
}

namespace {

// log-softmax of v in place
void log_softmax(std::vector<double>& v) {
  const double mx = *std::max_element(v.begin(), v.end());
  double z = 0.0;
  for (double x : v) z += std::exp(x - mx);
  const double lse = mx + std::log(z);
  for (auto& x : v) x -= lse;
}

// Log-factors of the joint: log p(w|s,g) [W x S x G], log p(s|g) [S x G], log p(g).
struct Factors {
  std::vector<double> lw, ls, lg;
};

Factors factors(const GenderedModelParams& p) {
  const std::size_t W = p.n_words(), S = p.n_sent(), G = p.n_genders();
  Factors f;
  f.lw.resize(W * S * G);
  std::vector<double> col(W);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t g = 0; g < G; ++g) {
      for (std::size_t w = 0; w < W; ++w) col[w] = p.m[w] + p.eta_at(w, s, g);
      log_softmax(col);
      for (std::size_t w = 0; w < W; ++w) f.lw[(w * S + s) * G + g] = col[w];
    }
  }
  f.ls.resize(S * G);
  std::vector<double> sc(S);
  for (std::size_t g = 0; g < G; ++g) {
    for (std::size_t s = 0; s < S; ++s) sc[s] = p.sigma[s * G + g];
    log_softmax(sc);
    for (std::size_t s = 0; s < S; ++s) f.ls[s * G + g] = sc[s];
  }
  f.lg = p.phi_g;
  log_softmax(f.lg);
  return f;
}

// j(w,s,g) = p(w|s,g) p(s|g) p(g)
std::vector<double> joint3(const GenderedModelParams& p, const Factors& f) {
  const std::size_t W = p.n_words(), S = p.n_sent(), G = p.n_genders();
  std::vector<double> j(W * S * G);
  for (std::size_t w = 0; w < W; ++w) {
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t g = 0; g < G; ++g) {
        const std::size_t i = (w * S + s) * G + g;
        j[i] = std::exp(f.lw[i] + f.ls[s * G + g] + f.lg[g]);
      }
    }
  }
  return j;
}

}  // namespace

std::vector<double> word_given_sent_gender(const GenderedModelParams& p, std::size_t s, std::size_t g) {
  require(s < p.n_sent() && g < p.n_genders(), ErrorKind::domain, "sentiment or gender index out of range");
  std::vector<double> v(p.n_words());
  for (std::size_t w = 0; w < p.n_words(); ++w) v[w] = p.m[w] + p.eta_at(w, s, g);
  log_softmax(v);
  for (auto& x : v) x = std::exp(x);
  return v;
}

bias::DiscreteJoint marginal_word_gender(const GenderedModelParams& p) {
  p.validate();
  const std::size_t W = p.n_words(), S = p.n_sent(), G = p.n_genders();
  const auto j = joint3(p, factors(p));
  bias::DiscreteJoint out{W, G, std::vector<double>(W * G, 0.0)};
  for (std::size_t w = 0; w < W; ++w) {
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t g = 0; g < G; ++g) out.p[w * G + g] += j[(w * S + s) * G + g];
    }
  }
  return out;
}

std::vector<double> sentiment_posterior(const GenderedModelParams& p, std::size_t w) {
  p.validate();
  require(w < p.n_words(), ErrorKind::domain, "word index out of range");
  const std::size_t S = p.n_sent(), G = p.n_genders();
  const auto f = factors(p);
  // log sum_g exp(...) per s, then normalize over s
  std::vector<double> ls(S);
  for (std::size_t s = 0; s < S; ++s) {
    std::vector<double> t(G);
    for (std::size_t g = 0; g < G; ++g) t[g] = f.lw[(w * S + s) * G + g] + f.ls[s * G + g] + f.lg[g];
    const double mx = *std::max_element(t.begin(), t.end());
    double z = 0.0;
    for (double x : t) z += std::exp(x - mx);
    ls[s] = mx + std::log(z);
  }
  log_softmax(ls);
  for (auto& x : ls) x = std::exp(x);
  return ls;
}

GenderedData make_data(const io::CooccurrenceCounts& counts, const io::SentimentLexicon* lex,
                       bool with_sentiment) {
  const std::size_t W = counts.words.size(), G = counts.groups.size();
  require(W > 0 && G > 0, ErrorKind::empty, "count table is empty");
  GenderedData d;
  d.words = counts.words;
  d.genders = counts.groups;
  d.sentiments = with_sentiment ? sentiment_inventory() : std::vector<std::string>{"all"};
  const std::size_t S = d.sentiments.size();
  double total = 0.0;
  for (auto c : counts.counts) total += static_cast<double>(c);
  require(total > 0.0, ErrorKind::empty, "count table has no mass");
  d.p_emp.resize(W * G);
  for (std::size_t i = 0; i < W * G; ++i) d.p_emp[i] = static_cast<double>(counts.counts[i]) / total;
  d.q.assign(W * S, 0.0);
  d.covered.assign(W, false);
  if (with_sentiment && lex != nullptr) {
    // lexicon axes are (pos, neg, neu); the inventory is (neg, neu, pos)
    const io::Axis order[3] = {io::Axis::neg, io::Axis::neu, io::Axis::pos};
    for (std::size_t w = 0; w < W; ++w) {
      auto it = lex->entries.find(d.words[w]);
      if (it == lex->entries.end()) continue;
      d.covered[w] = true;
      for (std::size_t s = 0; s < 3; ++s) d.q[w * S + s] = it->second[static_cast<std::size_t>(order[s])];
    }
  }
  return d;
}

void GenderedObjectiveConfig::validate() const {
  require(alpha >= 0.0 && beta >= 0.0, ErrorKind::domain, "alpha and beta must be >= 0");
  require(learning_rate > 0.0, ErrorKind::domain, "learning rate must be positive");
  require(max_epochs >= 1, ErrorKind::domain, "max_epochs must be positive");
}

std::vector<double> alpha_grid() { return {1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1, 10, 100}; }
std::vector<double> beta_grid() { return {0.0, 1e-5, 1e-4, 1e-3, 1e-2}; }

namespace {

void check_aligned(const GenderedModelParams& p, const GenderedData& d) {
  require(p.words == d.words && p.sentiments == d.sentiments && p.genders == d.genders, ErrorKind::shape,
          "model inventories do not match the data");
}

double l1_norm(const GenderedModelParams& p) {
  double s = 0.0;
  for (const auto* v : {&p.eta, &p.sigma, &p.phi_g}) {
    for (double x : *v) s += std::abs(x);
  }
  return s;
}

// Objective terms and, when `grad` is non-null, d total / d (m, eta, sigma, phi).
struct Grad {
  std::vector<double> m, eta, sigma, phi;
};

ObjectiveTerms evaluate(const GenderedModelParams& p, const GenderedData& d, const GenderedObjectiveConfig& cfg,
                        Grad* grad) {
  const std::size_t W = p.n_words(), S = p.n_sent(), G = p.n_genders();
  const auto f = factors(p);
  const auto j = joint3(p, f);
  ObjectiveTerms t;
  // G3 = d total / d log j(w,s,g)
  std::vector<double> g3(W * S * G, 0.0);
  for (std::size_t w = 0; w < W; ++w) {
    for (std::size_t g = 0; g < G; ++g) {
      const double pe = d.p_emp[w * G + g];
      if (pe == 0.0) continue;
      double pwg = 0.0;
      for (std::size_t s = 0; s < S; ++s) pwg += j[(w * S + s) * G + g];
      t.cross_entropy -= pe * std::log(pwg);
      for (std::size_t s = 0; s < S; ++s) g3[(w * S + s) * G + g] -= pe * j[(w * S + s) * G + g] / pwg;
    }
  }
  for (std::size_t w = 0; w < W; ++w) {
    if (!d.covered[w]) continue;
    std::vector<double> jws(S, 0.0);
    double pw = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t g = 0; g < G; ++g) jws[s] += j[(w * S + s) * G + g];
      pw += jws[s];
    }
    for (std::size_t s = 0; s < S; ++s) {
      const double q = d.q[w * S + s];
      if (q > 0.0) t.kl += q * std::log(q * pw / jws[s]);
      if (cfg.alpha == 0.0) continue;
      for (std::size_t g = 0; g < G; ++g) {
        const std::size_t i = (w * S + s) * G + g;
        g3[i] += cfg.alpha * j[i] * (1.0 / pw - q / jws[s]);
      }
    }
  }
  t.l1 = l1_norm(p);
  t.total = t.cross_entropy + cfg.alpha * t.kl + cfg.beta * t.l1;
  if (grad == nullptr) return t;

  grad->m.assign(W, 0.0);
  grad->eta.assign(W * S * G, 0.0);
  grad->sigma.assign(S * G, 0.0);
  grad->phi.assign(G, 0.0);
  std::vector<double> sum_sg(S * G, 0.0), sum_g(G, 0.0);
  for (std::size_t w = 0; w < W; ++w) {
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t g = 0; g < G; ++g) sum_sg[s * G + g] += g3[(w * S + s) * G + g];
    }
  }
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t g = 0; g < G; ++g) sum_g[g] += sum_sg[s * G + g];
  }
  double sum_all = 0.0;
  for (double v : sum_g) sum_all += v;
  for (std::size_t w = 0; w < W; ++w) {
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t g = 0; g < G; ++g) {
        const std::size_t i = (w * S + s) * G + g;
        const double dz = g3[i] - std::exp(f.lw[i]) * sum_sg[s * G + g];
        grad->eta[i] = dz;
        grad->m[w] += dz;
      }
    }
  }
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t g = 0; g < G; ++g) {
      grad->sigma[s * G + g] = sum_sg[s * G + g] - std::exp(f.ls[s * G + g]) * sum_g[g];
    }
  }
  for (std::size_t g = 0; g < G; ++g) grad->phi[g] = sum_g[g] - std::exp(f.lg[g]) * sum_all;
  if (cfg.beta > 0.0) {
    auto sub = [&](const std::vector<double>& v, std::vector<double>& gv) {
      for (std::size_t i = 0; i < v.size(); ++i) gv[i] += cfg.beta * (v[i] > 0 ? 1.0 : v[i] < 0 ? -1.0 : 0.0);
    };
    sub(p.eta, grad->eta);
    sub(p.sigma, grad->sigma);
    sub(p.phi_g, grad->phi);
  }
  return t;
}

}  // namespace

ObjectiveTerms objective(const GenderedModelParams& p, const GenderedData& data,
                         const GenderedObjectiveConfig& cfg) {
  p.validate();
  check_aligned(p, data);
  cfg.validate();
  return evaluate(p, data, cfg, nullptr);
}

ObjectiveTerms objective_gradient(const GenderedModelParams& p, const GenderedData& data,
                                  const GenderedObjectiveConfig& cfg, GenderedModelParams& grad) {
  p.validate();
  check_aligned(p, data);
  cfg.validate();
  Grad g;
  const auto t = evaluate(p, data, cfg, &g);
  grad = p;
  grad.m = std::move(g.m);
  grad.eta = std::move(g.eta);
  grad.sigma = std::move(g.sigma);
  grad.phi_g = std::move(g.phi);
  return t;
}

TrainedGendered train_gendered_model(const GenderedData& data, const GenderedObjectiveConfig& cfg) {
  cfg.validate();
  const std::size_t W = data.words.size(), S = data.sentiments.size(), G = data.genders.size();
  GenderedModelParams p = zero_params(data.words, data.sentiments, data.genders);
  for (std::size_t w = 0; w < W; ++w) {
    double pw = 0.0;
    for (std::size_t g = 0; g < G; ++g) pw += data.p_emp[w * G + g];
    p.m[w] = std::log(std::max(pw, 1e-12));
  }
  Rng rng(cfg.seed);
  for (auto& v : p.eta) v = rng.uniform(-0.01, 0.01);
  for (auto& v : p.sigma) v = rng.uniform(-0.01, 0.01);

  // parameter vector layout: eta | sigma | phi | m
  const std::size_t n_eta = W * S * G, n_sig = S * G;
  const std::size_t n = n_eta + n_sig + G + (cfg.learn_background ? W : 0);
  std::vector<double> theta(n), gvec(n);
  auto pack = [&] {
    std::copy(p.eta.begin(), p.eta.end(), theta.begin());
    std::copy(p.sigma.begin(), p.sigma.end(), theta.begin() + static_cast<std::ptrdiff_t>(n_eta));
    std::copy(p.phi_g.begin(), p.phi_g.end(), theta.begin() + static_cast<std::ptrdiff_t>(n_eta + n_sig));
    if (cfg.learn_background) std::copy(p.m.begin(), p.m.end(), theta.begin() + static_cast<std::ptrdiff_t>(n_eta + n_sig + G));
  };
  auto unpack = [&] {
    auto it = theta.begin();
    std::copy(it, it + static_cast<std::ptrdiff_t>(n_eta), p.eta.begin());
    it += static_cast<std::ptrdiff_t>(n_eta);
    std::copy(it, it + static_cast<std::ptrdiff_t>(n_sig), p.sigma.begin());
    it += static_cast<std::ptrdiff_t>(n_sig);
    std::copy(it, it + static_cast<std::ptrdiff_t>(G), p.phi_g.begin());
    it += static_cast<std::ptrdiff_t>(G);
    if (cfg.learn_background) std::copy(it, it + static_cast<std::ptrdiff_t>(W), p.m.begin());
  };
  pack();
  train::Adam adam(n, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
  TrainedGendered out;
  out.params = p;
  double best = std::numeric_limits<double>::infinity();
  double best_gain_ref = best;
  std::size_t since = 0;
  Grad gr;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t = evaluate(p, data, cfg, &gr);
    if (!std::isfinite(t.total)) {
      fail(ErrorKind::numeric, "gendered model diverged at epoch " + std::to_string(epoch));
    }
    out.log.push_back(t.total);
    if (t.total < best) {
      best = t.total;
      out.params = p;
      out.best_epoch = epoch;
    }
    if (t.total < best_gain_ref - cfg.tol) {
      best_gain_ref = t.total;
      since = 0;
    } else if (++since >= cfg.patience) {
      break;
    }
    std::copy(gr.eta.begin(), gr.eta.end(), gvec.begin());
    std::copy(gr.sigma.begin(), gr.sigma.end(), gvec.begin() + static_cast<std::ptrdiff_t>(n_eta));
    std::copy(gr.phi.begin(), gr.phi.end(), gvec.begin() + static_cast<std::ptrdiff_t>(n_eta + n_sig));
    if (cfg.learn_background) std::copy(gr.m.begin(), gr.m.end(), gvec.begin() + static_cast<std::ptrdiff_t>(n_eta + n_sig + G));
    adam.step(theta, gvec);
    unpack();
  }
  return out;
}

Ranking deviation_ranking(const GenderedModelParams& p, std::size_t g, std::size_t s, std::size_t top_n) {
  require(g < p.n_genders() && s < p.n_sent(), ErrorKind::domain, "sentiment or gender index out of range");
  Ranking r;
  for (std::size_t w = 0; w < p.n_words(); ++w) r.words.push_back({p.words[w], p.eta_at(w, s, g)});
  std::sort(r.words.begin(), r.words.end(), [](const RankedWord& a, const RankedWord& b) {
    return a.score != b.score ? a.score > b.score : a.word < b.word;
  });
  r.clipped = top_n > r.words.size();
  if (!r.clipped) r.words.resize(top_n);
  return r;
}

std::string format_rankings(const GenderedModelParams& p, std::size_t top_n) {
  std::string out = "gender\tsentiment\trank\tword\tdeviation\n";
  for (std::size_t g = 0; g < p.n_genders(); ++g) {
    for (std::size_t s = 0; s < p.n_sent(); ++s) {
      const auto r = deviation_ranking(p, g, s, top_n);
      for (std::size_t i = 0; i < r.words.size(); ++i) {
        out += p.genders[g] + '\t' + p.sentiments[s] + '\t' + std::to_string(i + 1) + '\t' + r.words[i].word +
               '\t' + util::format_double(r.words[i].score) + '\n';
      }
    }
  }
  return out;
}

std::vector<GridCell> train_grid(const GenderedData& data, const GenderedObjectiveConfig& base,
                                 const std::vector<double>& alphas, const std::vector<double>& betas,
                                 std::size_t jobs) {
  require(!alphas.empty() && !betas.empty(), ErrorKind::domain, "hyperparameter grid is empty");
  std::vector<GridCell> cells;
  for (double a : alphas) {
    for (double b : betas) cells.push_back({a, b, {}});
  }
  parallel_for(cells.size(), jobs, [&](std::size_t i) {
    GenderedObjectiveConfig cfg = base;
    cfg.alpha = cells[i].alpha;
    cfg.beta = cells[i].beta;
    cells[i].params = train_gendered_model(data, cfg).params;
  });
  return cells;
}

std::string format_averaged_rankings(const std::vector<GridCell>& cells, std::size_t top_n) {
  require(!cells.empty(), ErrorKind::domain, "no grid cells");
  const auto& p0 = cells.front().params;
  const std::size_t W = p0.n_words();
  std::string out = "gender\tsentiment\trank\tword\tdeviation\n";
  for (std::size_t g = 0; g < p0.n_genders(); ++g) {
    for (std::size_t s = 0; s < p0.n_sent(); ++s) {
      std::map<std::string, std::pair<double, double>> acc;  // word -> (sum 1/rank, sum eta)
      for (const auto& c : cells) {
        const auto r = deviation_ranking(c.params, g, s, W);
        for (std::size_t i = 0; i < r.words.size(); ++i) {
          auto& a = acc[r.words[i].word];
          a.first += 1.0 / static_cast<double>(i + 1);
          a.second += r.words[i].score;
        }
      }
      std::vector<std::pair<std::string, std::pair<double, double>>> v(acc.begin(), acc.end());
      std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second.first > b.second.first; });
      const double nc = static_cast<double>(cells.size());
      for (std::size_t i = 0; i < std::min(top_n, v.size()); ++i) {
        out += p0.genders[g] + '\t' + p0.sentiments[s] + '\t' + std::to_string(i + 1) + '\t' + v[i].first + '\t' +
               util::format_double(v[i].second.second / nc) + '\n';
      }
    }
  }
  return out;
}

}  // namespace latprobe::gendered
