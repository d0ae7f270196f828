#pragma once

// Distribution-level measures: weighted Jensen-Shannon divergence, plug-in
// mutual information, and observational vs interventional marginals of an
// outcome a given gender g and noun context n. Natural logs.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace latprobe::bias {

/// p(a, g) as an |A| x |G| row-major table.
struct DiscreteJoint {
  std::size_t n_a = 0;
  std::size_t n_g = 0;
  std::vector<double> p;

  double at(std::size_t a, std::size_t g) const { return p[a * n_g + g]; }
  void validate() const;  // non-negative, sums to 1 within 1e-9
};

/// sum p(a,g) ln[p(a,g) / (p(a) p(g))], with 0 ln 0 = 0.
double discrete_mi(const DiscreteJoint& joint);

/// sum_i pi_i KL(p_i || m), m = sum_i pi_i p_i.
double weighted_jsd(const std::vector<std::vector<double>>& dists, const std::vector<double>& pi);

/// p(a | g, n) for held (g, n) contexts, with noun and gender marginals.
struct ConditionalTable {
  struct Row {
    std::size_t g = 0;
    std::size_t n = 0;
    std::vector<double> dist;  // over outcomes
  };
  std::size_t n_outcomes = 0;
  std::vector<double> p_noun;
  std::vector<double> p_gender;
  std::vector<Row> rows;

  std::size_t n_genders() const { return p_gender.size(); }
  std::size_t n_nouns() const { return p_noun.size(); }
  const Row* find(std::size_t g, std::size_t n) const;
  void validate() const;
};

/// p~(a, g) proportional to sum over held rows of p_N(n) p(a | g_n, n) 1{g = g_n}.
DiscreteJoint observational_marginal(const ConditionalTable& ct);

/// p(a | do(g)) = sum_n p(a | g, n) p_N(n); every (g, n) row must be present.
std::vector<double> interventional_marginal(const ConditionalTable& ct, std::size_t g);

/// p(a | do(g)) p_G(g).
DiscreteJoint interventional_joint(const ConditionalTable& ct);

/// Weighted JSD of the interventional marginals under p_G.
double mi_do(const ConditionalTable& ct);

/// One (gender, noun, outcome) observation.
struct Observation {
  std::size_t g = 0;
  std::size_t n = 0;
  std::size_t a = 0;
};

/// Plug-in table from observations with add-`smoothing` outcome counts.
/// Without smoothing, unobserved (g, n) contexts are left out of the table.
ConditionalTable table_from_observations(const std::vector<Observation>& obs, std::size_t n_genders,
                                         std::size_t n_nouns, std::size_t n_outcomes,
                                         double smoothing);

/// p = (1 + #{stat(shuffled) >= stat(labels)}) / (n_perm + 1). Replica r
/// shuffles `labels` with derive_seed(seed, r).
double label_permutation_test(const std::function<double(const std::vector<std::size_t>&)>& stat,
                              const std::vector<std::size_t>& labels, std::size_t n_perm,
                              std::uint64_t seed, std::size_t jobs = 1);

}  // namespace latprobe::bias
