#pragma once

// Joint training of probe parameters theta and subset-family parameters phi by
// maximizing the variational lower bound
//
//   L = mean_n (1/M) sum_m log p_theta(pi_n | h_n, C_nm) + entropy_scale * H(q_phi),
//   C_nm ~ q_phi,
//
// with direct gradients for theta and score-function gradients for phi.
// The uniform prior over subsets only adds a constant and is left out.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "latprobe/io/dataset.hpp"
#include "latprobe/probe/probe.hpp"
#include "latprobe/rng.hpp"
#include "latprobe/subsets/families.hpp"

namespace latprobe::train {

struct TrainConfig {
  probe::Arch arch = probe::Arch::linear;
  std::size_t hidden = 128;
  subsets::FamilyKind family = subsets::FamilyKind::poisson;
  bool full_set_mode = false;  // q fixed to the full dimension set
  std::size_t mc_samples = 5;
  std::size_t max_epochs = 2000;
  std::size_t patience = 50;
  double min_delta = 1e-4;  // holdout gain needed to reset patience
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double l1 = 1e-5;
  double l2 = 1e-5;
  double entropy_scale = 0.01;
  std::size_t batch_size = 0;  // 0 = full batch
  double holdout_fraction = 0.1;
  bool exact = false;  // enumerate subsets instead of sampling (|D| <= 12)
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochLog {
  std::size_t epoch = 0;
  double bound_train = 0.0;
  double bound_holdout = 0.0;
  double best_so_far = 0.0;
};

struct TrainedProbe {
  probe::ProbeParams theta;
  subsets::SubsetFamilyParams phi;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  std::string stop_reason;  // "patience" or "max_epochs"
  TrainConfig config;
};

/// Bound value and gradients from one pass over `rows`.
struct Estimate {
  double bound = 0.0;
  double mean_loglik = 0.0;
  double entropy = 0.0;
  std::vector<double> grad_theta;  // d bound / d theta
  std::vector<double> grad_phi;    // d bound / d phi
};

/// Monte Carlo estimate with M samples per row. Gradients are filled when `with_grads`.
Estimate mc_estimate(const probe::ProbeParams& theta, const subsets::VariationalFamily& q,
                     const io::ReprDataset& ds, std::span<const std::size_t> rows, std::size_t M,
                     double entropy_scale, Rng& rng, bool with_grads);

/// Same quantities with the expectation over C computed by enumeration.
Estimate exact_estimate(const probe::ProbeParams& theta, const subsets::VariationalFamily& q,
                        const io::ReprDataset& ds, std::span<const std::size_t> rows,
                        double entropy_scale, bool with_grads);

double elbo_estimate(const probe::ProbeParams& theta, const subsets::SubsetFamilyParams& phi,
                     const io::ReprDataset& ds, std::span<const std::size_t> rows, std::size_t M,
                     double entropy_scale, Rng& rng);

std::vector<double> grad_theta_estimate(const probe::ProbeParams& theta,
                                        const subsets::SubsetFamilyParams& phi,
                                        const io::ReprDataset& ds,
                                        std::span<const std::size_t> rows, std::size_t M,
                                        Rng& rng);

std::vector<double> grad_phi_estimate(const probe::ProbeParams& theta,
                                      const subsets::SubsetFamilyParams& phi,
                                      const io::ReprDataset& ds, std::span<const std::size_t> rows,
                                      std::size_t M, double entropy_scale, Rng& rng);

/// mean_n log sum_{C in support} p_theta(pi_n | h_n, C), by enumeration.
double exact_log_marginal(const probe::ProbeParams& theta, const subsets::SubsetFamilyParams& phi,
                          const io::ReprDataset& ds, std::span<const std::size_t> rows);

class Adam {
 public:
  Adam(std::size_t n, double lr, double beta1, double beta2, double eps);
  /// Descent step on `params` for the loss gradient `grad`.
  void step(std::span<double> params, std::span<const double> grad);

 private:
  double lr_, b1_, b2_, eps_;
  std::size_t t_ = 0;
  std::vector<double> m_, v_;
};

/// Trains on `rows`, carving a row-level early-stopping holdout from them.
TrainedProbe train_probe(const io::ReprDataset& ds, std::span<const std::size_t> rows,
                         const TrainConfig& config);

/// Trains on the train split (or every row of an untagged dataset).
TrainedProbe train_probe(const io::ReprDataset& ds, const TrainConfig& config);

/// `epoch  bound_train  bound_holdout  best_so_far` TSV.
std::string format_training_log(const TrainedProbe& tp);

}  // namespace latprobe::train
