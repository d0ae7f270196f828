#pragma once

// Generative baseline: one multivariate Gaussian per class with a shrunk
// covariance (1 - rho) S + rho diag(S), priors from class frequencies.
// Statistics are kept on all dimensions; restricting to a subset C takes the
// corresponding sub-blocks, which equals fitting on C directly.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "latprobe/io/dataset.hpp"
#include "latprobe/subsets/families.hpp"

namespace latprobe::probe {

struct GaussianProbe {
  std::size_t dim = 0;
  double shrinkage = 0.1;
  std::vector<std::string> classes;
  std::vector<double> log_prior;
  std::vector<std::vector<double>> means;  // per class, length dim
  std::vector<std::vector<double>> covs;   // per class, dim x dim row-major, already shrunk
};

/// Fits on `rows` of `ds`. Every class in the inventory needs >= 2 rows.
GaussianProbe gaussian_probe_fit(const io::ReprDataset& ds, std::span<const std::size_t> rows,
                                 double shrinkage = 0.1);

/// The model marginalized onto C, with Cholesky factors precomputed.
class GaussianView {
 public:
  GaussianView(const GaussianProbe& model, const subsets::Subset& c);

  /// Posterior class log-probabilities for a full-length representation.
  std::vector<double> log_probs(std::span<const double> h) const;

 private:
  std::size_t k_ = 0;
  std::vector<std::size_t> idx_;
  std::vector<double> log_prior_;
  std::vector<std::vector<double>> mean_;    // per class, length k
  std::vector<std::vector<double>> inv_l_;   // per class, L^-1 (k x k row-major)
  std::vector<double> log_norm_;             // per class, -0.5 log det(2 pi Sigma)
};

std::vector<double> gaussian_probe_log_probs(const GaussianProbe& model, std::span<const double> h,
                                             const subsets::Subset& c);

}  // namespace latprobe::probe
