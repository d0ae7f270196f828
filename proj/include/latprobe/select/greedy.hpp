#pragma once

// Greedy dimension selection and probe evaluation metrics.
//
// A Scorer maps (C, rows) to class log-probabilities with the representation
// restricted to C, so the latent-variable probe and the Gaussian baseline go
// through the same selection and metric code.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "latprobe/io/dataset.hpp"
#include "latprobe/probe/gaussian.hpp"
#include "latprobe/probe/probe.hpp"
#include "latprobe/subsets/families.hpp"
#include "latprobe/train/train.hpp"

namespace latprobe::select {

/// Fills `out` (rows.size() x n_classes, row-major) with log p(class | h_row, C).
using Scorer = std::function<void(const subsets::Subset& c, const io::ReprDataset& ds,
                                  std::span<const std::size_t> rows, std::vector<double>& out)>;

Scorer probe_scorer(const probe::ProbeParams& theta);
/// The model is captured by reference and must outlive the scorer.
Scorer gaussian_scorer(const probe::GaussianProbe& model);

struct Metrics {
  double mean_loglik = 0.0;
  double label_entropy = 0.0;  // plug-in H(P) of the evaluation labels, nats
  double mi_nats = 0.0;
  double mi_bits = 0.0;
  double nmi = 0.0;  // NaN when label_entropy == 0
  double accuracy = 0.0;
};

/// Plug-in entropy (nats) of the labels of `rows`.
double label_entropy(const io::ReprDataset& ds, std::span<const std::size_t> rows);

Metrics evaluate(const Scorer& scorer, const subsets::Subset& c, const io::ReprDataset& ds,
                 std::span<const std::size_t> rows);

struct MiBound {
  double nats = 0.0;
  double bits = 0.0;
};

/// H(P) - mean NLL on `rows`, restricted to C.
MiBound mi_lower_bound(const probe::ProbeParams& theta, const subsets::Subset& c,
                       const io::ReprDataset& ds, std::span<const std::size_t> rows);
/// MI / H(P); throws an undefined error when H(P) = 0.
double nmi(const probe::ProbeParams& theta, const subsets::Subset& c, const io::ReprDataset& ds,
           std::span<const std::size_t> rows);
/// Argmax match rate; argmax ties go to the earlier class.
double accuracy(const probe::ProbeParams& theta, const subsets::Subset& c,
                const io::ReprDataset& ds, std::span<const std::size_t> rows);

struct SelectionReport {
  std::vector<std::size_t> dims;     // selection order; prefix t is C_t
  std::vector<double> dev_loglik;    // per step, the winning candidate's dev mean log-likelihood
  std::vector<Metrics> test;         // per step
};

/// k_max greedy steps maximizing dev mean log-likelihood (ties to the lowest
/// index), reporting metrics on `test_rows`. Candidates run on `jobs` threads;
/// the result does not depend on `jobs`.
SelectionReport greedy_select(const Scorer& scorer, const io::ReprDataset& ds,
                              std::span<const std::size_t> dev_rows,
                              std::span<const std::size_t> test_rows, std::size_t k_max,
                              std::size_t jobs = 1);

/// `step  dim  mi_bits  nmi  accuracy` TSV (1-based steps).
std::string format_selection(const SelectionReport& r);

/// Copy of `ds` with every dimension outside C set to zero.
io::ReprDataset masked_dataset(const io::ReprDataset& ds, const subsets::Subset& c);

struct UpperBound {
  train::TrainedProbe probe;
  Metrics metrics;
};

/// Trains a fresh full-set probe on inputs masked to C and evaluates it on `eval_rows`.
UpperBound retrained_upper_bound(const io::ReprDataset& ds, const subsets::Subset& c,
                                 const train::TrainConfig& config,
                                 std::span<const std::size_t> train_rows,
                                 std::span<const std::size_t> eval_rows);

}  // namespace latprobe::select
