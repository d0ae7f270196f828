#pragma once

// Overlap between the top-k dimensions selected by different runs, and the
// significance of that overlap under independent uniform k-subsets.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "latprobe/rng.hpp"

namespace latprobe::overlap {

struct Overlap {
  std::size_t m = 0;
  double pct = 0.0;  // m / k
};

/// Sizes must match; indices are treated as sets.
Overlap topk_overlap(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b);

/// P(|A ∩ B| >= m) for independent uniform k-subsets of a universe of size d.
double overlap_pvalue_exact(std::size_t m, std::size_t k, std::size_t d);
/// Monte Carlo estimate of the same tail from n_perm random subset pairs.
double overlap_pvalue_permutation(std::size_t m, std::size_t k, std::size_t d,
                                  std::size_t n_perm, Rng& rng);

enum class PvalueMethod { exact, permutation };

struct PvalueConfig {
  PvalueMethod method = PvalueMethod::exact;
  std::size_t n_perm = 10000;
  std::uint64_t seed = 0;
};

/// Step-down rejection flags in the input order.
std::vector<bool> holm_bonferroni(const std::vector<double>& p, double alpha = 0.05);

struct RunSelection {
  std::string name;
  std::size_t universe = 0;
  std::vector<std::size_t> dims;  // selection order
};

struct OverlapResult {
  std::size_t run_a = 0;
  std::size_t run_b = 0;
  std::size_t k = 0;
  std::size_t d = 0;
  std::size_t m = 0;
  double pct = 0.0;
  double p_raw = 1.0;
  bool reject = false;
};

/// One result per unordered pair (a < b), Holm-corrected across all pairs.
/// Pair i uses the RNG stream derive_seed(seed, i).
std::vector<OverlapResult> overlap_matrix(const std::vector<RunSelection>& runs, std::size_t k,
                                          double alpha, const PvalueConfig& method,
                                          std::size_t jobs = 1);

/// `run_a  run_b  m  pct  p_raw  reject` TSV with both orientations of every pair.
std::string format_overlap(const std::vector<RunSelection>& runs,
                           const std::vector<OverlapResult>& results);

}  // namespace latprobe::overlap
