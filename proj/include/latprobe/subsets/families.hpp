#pragma once

// Distributions over subsets C of the dimension set D, used as the variational
// family q_phi(C). Each dimension d carries a weight w_d = exp(phi_d).
//
//   poisson       independent inclusion with probability w_d / (1 + w_d)
//   cond_poisson  size k ~ q_size, then C with probability prod_{d in C} w_d / e_k(w)
//   full_set      point mass on C = D (the plain linear baseline)
//
// All subset-probability arithmetic is carried out in log space.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "latprobe/rng.hpp"

namespace latprobe::subsets {

enum class FamilyKind { poisson, cond_poisson, full_set };

std::string_view to_string(FamilyKind k) noexcept;
FamilyKind parse_family(std::string_view s);  // throws domain error

/// Strictly increasing dimension indices.
class Subset {
 public:
  Subset() = default;

  /// Sorts the indices; throws a domain error on duplicates or indices >= universe.
  static Subset of(std::vector<std::size_t> indices, std::size_t universe);
  static Subset all(std::size_t universe);

  const std::vector<std::size_t>& indices() const noexcept { return idx_; }
  std::size_t size() const noexcept { return idx_.size(); }
  bool empty() const noexcept { return idx_.empty(); }
  bool contains(std::size_t d) const noexcept;
  auto begin() const noexcept { return idx_.begin(); }
  auto end() const noexcept { return idx_.end(); }

  /// 0/1 membership vector of length `universe`.
  std::vector<double> mask(std::size_t universe) const;

  friend bool operator==(const Subset&, const Subset&) = default;

 private:
  std::vector<std::size_t> idx_;
};

/// Distribution over sizes 0..|D|, stored as log probabilities (-inf off support).
struct SizeDistribution {
  std::vector<double> log_prob;

  /// Uniform over {lo, ..., hi}.
  static SizeDistribution uniform(std::size_t universe, std::size_t lo, std::size_t hi);
  /// Uniform over {1, ..., |D|}.
  static SizeDistribution uniform(std::size_t universe) { return uniform(universe, 1, universe); }

  double entropy() const;
  bool supports(std::size_t k) const;
  std::size_t sample(Rng& rng) const;
};

struct SubsetFamilyParams {
  FamilyKind kind = FamilyKind::poisson;
  std::vector<double> phi;
  SizeDistribution size_dist;  // cond_poisson only

  std::size_t dim() const noexcept { return phi.size(); }
  void validate() const;

  static SubsetFamilyParams poisson(std::vector<double> phi);
  static SubsetFamilyParams cond_poisson(std::vector<double> phi);  // uniform sizes 1..|D|
  static SubsetFamilyParams full_set(std::size_t dim);
};

// --- Poisson sampling -------------------------------------------------------

double poisson_log_prob(const SubsetFamilyParams& params, const Subset& c);
double poisson_entropy(const SubsetFamilyParams& params);
Subset poisson_sample(const SubsetFamilyParams& params, Rng& rng);

// --- Conditional Poisson sampling ------------------------------------------

/// e_k(w), the elementary symmetric polynomial of degree k.
double cp_partition(std::span<const double> weights, std::size_t k);
/// log e_k(exp(log_weights)); finite for weights spanning many orders of magnitude.
double log_cp_partition(std::span<const double> log_weights, std::size_t k);

/// log q(C); returns -infinity when |C| is outside the size support.
double cp_log_prob(const SubsetFamilyParams& params, const Subset& c);
/// Entropy of the size-k conditional Poisson design.
double cp_entropy_fixed_k(std::span<const double> weights, std::size_t k);
double cp_family_entropy(const SubsetFamilyParams& params);
Subset cp_sample(const SubsetFamilyParams& params, Rng& rng);

/// Gradient of the family entropy with respect to phi.
std::vector<double> family_grad_phi_entropy(const SubsetFamilyParams& params);

/// A family with its dynamic-programming tables precomputed. Immutable after
/// construction, so it can be shared across threads.
class VariationalFamily {
 public:
  explicit VariationalFamily(SubsetFamilyParams params);

  const SubsetFamilyParams& params() const noexcept { return params_; }
  FamilyKind kind() const noexcept { return params_.kind; }
  std::size_t dim() const noexcept { return params_.dim(); }

  double log_prob(const Subset& c) const;
  double entropy() const;
  std::vector<double> grad_entropy() const;
  Subset sample(Rng& rng) const;

  /// Fills `mask` (length |D|) with a 0/1 sample and returns its size.
  std::size_t sample_mask(Rng& rng, std::span<double> mask) const;

  /// out += scale * grad_phi log q(C), with C given by a 0/1 mask of size `size`.
  void add_grad_log_prob(std::span<const double> mask, std::size_t size, double scale,
                         std::span<double> out) const;

  /// P(d in C | |C| = k) for the conditional Poisson design.
  double inclusion(std::size_t k, std::size_t d) const { return incl_[k * dim() + d]; }
  /// Marginal inclusion probability P(d in C) under the whole family.
  std::vector<double> marginal_inclusion() const;

 private:
  SubsetFamilyParams params_;
  std::vector<double> sigma_;     // poisson: w / (1 + w)
  std::vector<double> log_pre_;   // (D+1)^2: log e_i(first j weights)
  std::vector<double> mean_pre_;  // expected sum of log w under that design
  std::vector<double> log_suf_;   // (D+1)^2: log e_i(weights j..D-1)
  std::vector<double> mean_suf_;
  std::vector<double> incl_;      // (D+1) x D inclusion probabilities per size
  std::vector<double> cond_sum_;  // (D+1) x D: E[sum log w | d in C, |C| = k]

  std::size_t at(std::size_t j, std::size_t i) const noexcept { return j * (dim() + 1) + i; }
  double entropy_fixed_k(std::size_t k) const;
};

}  // namespace latprobe::subsets
