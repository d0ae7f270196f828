#include "latprobe/train/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "latprobe/error.hpp"
#include "latprobe/simd/kernels.hpp"
#include "latprobe/util/tsv.hpp"

namespace latprobe::train {

using probe::ProbeParams;
using subsets::FamilyKind;
using subsets::SubsetFamilyParams;
using subsets::VariationalFamily;

void TrainConfig::validate() const {
  require(mc_samples >= 1, ErrorKind::domain, "mc_samples must be >= 1");
  require(patience >= 1, ErrorKind::domain, "patience must be >= 1");
  require(max_epochs >= 1, ErrorKind::domain, "max_epochs must be >= 1");
  require(entropy_scale >= 0.0, ErrorKind::domain, "entropy_scale must be >= 0");
  require(min_delta >= 0.0, ErrorKind::domain, "min_delta must be >= 0");
  require(l1 >= 0.0 && l2 >= 0.0, ErrorKind::domain, "l1 and l2 must be >= 0");
  require(learning_rate > 0.0, ErrorKind::domain, "learning_rate must be > 0");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, ErrorKind::domain,
          "Adam betas must be in [0, 1)");
  require(adam_eps > 0.0, ErrorKind::domain, "adam_eps must be > 0");
  require(holdout_fraction >= 0.0 && holdout_fraction < 1.0, ErrorKind::domain,
          "holdout_fraction must be in [0, 1)");
}

namespace {

// Enumerates the family's support as (mask, size, q(C)).
template <class Fn>
void for_each_subset(const VariationalFamily& q, Fn&& fn) {
  const std::size_t n = q.dim();
  require(n <= 20, ErrorKind::domain, "exact enumeration needs |D| <= 20");
  std::vector<double> mask(n);
  if (q.kind() == FamilyKind::full_set) {
    std::fill(mask.begin(), mask.end(), 1.0);
    fn(std::span<const double>(mask), n, 1.0);
    return;
  }
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << n); ++bits) {
    std::vector<std::size_t> idx;
    for (std::size_t d = 0; d < n; ++d) {
      mask[d] = (bits >> d & 1u) ? 1.0 : 0.0;
      if (mask[d] != 0.0) idx.push_back(d);
    }
    const double lq = q.log_prob(subsets::Subset::of(idx, n));
    if (lq == -std::numeric_limits<double>::infinity()) continue;
    fn(std::span<const double>(mask), idx.size(), std::exp(lq));
  }
}

void check_rows(const ProbeParams& theta, const VariationalFamily& q, const io::ReprDataset& ds,
                std::span<const std::size_t> rows) {
  require(!rows.empty(), ErrorKind::empty, "batch is empty");
  require(theta.in_dim == ds.dim && q.dim() == ds.dim, ErrorKind::shape,
          "probe, family and dataset dimensions differ");
  require(theta.n_classes() == ds.inventory.size(), ErrorKind::shape,
          "probe classes do not match the dataset inventory");
}

void add_entropy_terms(const VariationalFamily& q, double entropy_scale, Estimate& e,
                       bool with_grads) {
  e.entropy = q.entropy();
  e.bound = e.mean_loglik + entropy_scale * e.entropy;
  if (with_grads && entropy_scale != 0.0) {
    const auto gh = q.grad_entropy();
    for (std::size_t d = 0; d < gh.size(); ++d) e.grad_phi[d] += entropy_scale * gh[d];
  }
}

}  // namespace

Estimate mc_estimate(const ProbeParams& theta, const VariationalFamily& q,
                     const io::ReprDataset& ds, std::span<const std::size_t> rows, std::size_t M,
                     double entropy_scale, Rng& rng, bool with_grads) {
  check_rows(theta, q, ds, rows);
  require(M >= 1, ErrorKind::domain, "M must be >= 1");
  const std::size_t n = ds.dim;
  Estimate e;
  if (with_grads) {
    e.grad_theta.assign(theta.theta.size(), 0.0);
    e.grad_phi.assign(n, 0.0);
  }
  probe::Workspace ws(theta);
  std::vector<double> mask(n), x(n);
  const double w = 1.0 / static_cast<double>(rows.size() * M);
  double total = 0.0;
  for (std::size_t r : rows) {
    const auto h = ds.row(r);
    const std::size_t y = ds.labels[r];
    for (std::size_t m = 0; m < M; ++m) {
      const std::size_t size = q.sample_mask(rng, mask);
      simd::mul(h, mask, x);
      const double lp = probe::log_prob_and_grad(theta, x, y, ws,
                                                 with_grads ? std::span<double>(e.grad_theta)
                                                            : std::span<double>(),
                                                 w);
      total += lp;
      if (with_grads) q.add_grad_log_prob(mask, size, w * lp, e.grad_phi);
    }
  }
  e.mean_loglik = total * w;
  add_entropy_terms(q, entropy_scale, e, with_grads);
  return e;
}

Estimate exact_estimate(const ProbeParams& theta, const VariationalFamily& q,
                        const io::ReprDataset& ds, std::span<const std::size_t> rows,
                        double entropy_scale, bool with_grads) {
  check_rows(theta, q, ds, rows);
  const std::size_t n = ds.dim;
  Estimate e;
  if (with_grads) {
    e.grad_theta.assign(theta.theta.size(), 0.0);
    e.grad_phi.assign(n, 0.0);
  }
  probe::Workspace ws(theta);
  std::vector<double> x(n);
  const double inv_rows = 1.0 / static_cast<double>(rows.size());
  double total = 0.0;
  for_each_subset(q, [&](std::span<const double> mask, std::size_t size, double qc) {
    double reward = 0.0;
    for (std::size_t r : rows) {
      simd::mul(ds.row(r), mask, x);
      reward += probe::log_prob_and_grad(theta, x, ds.labels[r], ws,
                                         with_grads ? std::span<double>(e.grad_theta)
                                                    : std::span<double>(),
                                         qc * inv_rows);
    }
    reward *= inv_rows;
    total += qc * reward;
    if (with_grads) q.add_grad_log_prob(mask, size, qc * reward, e.grad_phi);
  });
  e.mean_loglik = total;
  add_entropy_terms(q, entropy_scale, e, with_grads);
  return e;
}

double elbo_estimate(const ProbeParams& theta, const SubsetFamilyParams& phi,
                     const io::ReprDataset& ds, std::span<const std::size_t> rows, std::size_t M,
                     double entropy_scale, Rng& rng) {
  return mc_estimate(theta, VariationalFamily(phi), ds, rows, M, entropy_scale, rng, false).bound;
}

std::vector<double> grad_theta_estimate(const ProbeParams& theta, const SubsetFamilyParams& phi,
                                        const io::ReprDataset& ds,
                                        std::span<const std::size_t> rows, std::size_t M,
                                        Rng& rng) {
  return mc_estimate(theta, VariationalFamily(phi), ds, rows, M, 0.0, rng, true).grad_theta;
}

std::vector<double> grad_phi_estimate(const ProbeParams& theta, const SubsetFamilyParams& phi,
                                      const io::ReprDataset& ds, std::span<const std::size_t> rows,
                                      std::size_t M, double entropy_scale, Rng& rng) {
  return mc_estimate(theta, VariationalFamily(phi), ds, rows, M, entropy_scale, rng, true).grad_phi;
}

double exact_log_marginal(const ProbeParams& theta, const SubsetFamilyParams& phi,
                          const io::ReprDataset& ds, std::span<const std::size_t> rows) {
  const VariationalFamily q(phi);
  check_rows(theta, q, ds, rows);
  probe::Workspace ws(theta);
  std::vector<double> x(ds.dim);
  std::vector<std::vector<double>> per_row(rows.size());
  for_each_subset(q, [&](std::span<const double> mask, std::size_t, double) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      simd::mul(ds.row(rows[i]), mask, x);
      per_row[i].push_back(probe::log_prob_and_grad(theta, x, ds.labels[rows[i]], ws, {}));
    }
  });
  double total = 0.0;
  for (const auto& v : per_row) {
    const double mx = *std::max_element(v.begin(), v.end());
    double s = 0.0;
    for (double lp : v) s += std::exp(lp - mx);
    total += mx + std::log(s);
  }
  return total / static_cast<double>(rows.size());
}

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1_ * m_[i] + (1.0 - b1_) * grad[i];
    v_[i] = b2_ * v_[i] + (1.0 - b2_) * grad[i] * grad[i];
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

namespace {

SubsetFamilyParams initial_family(const TrainConfig& c, std::size_t dim) {
  if (c.full_set_mode || c.family == FamilyKind::full_set) return SubsetFamilyParams::full_set(dim);
  std::vector<double> phi(dim, 0.0);
  return c.family == FamilyKind::poisson ? SubsetFamilyParams::poisson(std::move(phi))
                                         : SubsetFamilyParams::cond_poisson(std::move(phi));
}

}  // namespace

TrainedProbe train_probe(const io::ReprDataset& ds, std::span<const std::size_t> rows,
                         const TrainConfig& config) {
  config.validate();
  require(!rows.empty(), ErrorKind::empty, "training split is empty");
  require(ds.inventory.size() >= 2, ErrorKind::domain, "need at least 2 label values");

  Rng rng(derive_seed(config.seed, 0));
  const std::uint64_t holdout_seed = derive_seed(config.seed, 1);
  const auto split = io::carve_holdout(rows, config.holdout_fraction, derive_seed(config.seed, 2));
  require(!split.fit.empty(), ErrorKind::empty, "no rows left to fit after carving the holdout");
  const std::vector<std::size_t>& eval_rows = split.holdout.empty() ? split.fit : split.holdout;

  TrainedProbe out;
  out.config = config;
  out.theta = probe::make_probe(config.arch, ds.dim, ds.inventory, rng, config.hidden);
  out.phi = initial_family(config, ds.dim);
  const bool learn_phi = out.phi.kind != FamilyKind::full_set;

  ProbeParams theta = out.theta;
  SubsetFamilyParams phi = out.phi;
  const std::size_t nt = theta.theta.size();
  const std::size_t np = learn_phi ? phi.phi.size() : 0;
  Adam adam(nt + np, config.learning_rate, config.beta1, config.beta2, config.adam_eps);
  std::vector<double> params(nt + np), grad(nt + np);

  std::vector<std::size_t> order = split.fit;
  const std::size_t bs = config.batch_size == 0 ? order.size() : std::min(config.batch_size, order.size());
  double best = -std::numeric_limits<double>::infinity();
  double last_gain = best;
  std::size_t last_gain_epoch = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    if (bs < order.size()) rng.shuffle(order.begin(), order.end());
    double train_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::span<const std::size_t> batch(order.data() + start, std::min(bs, order.size() - start));
      const VariationalFamily q(phi);
      const Estimate e = config.exact
                             ? exact_estimate(theta, q, ds, batch, config.entropy_scale, true)
                             : mc_estimate(theta, q, ds, batch, config.mc_samples,
                                           config.entropy_scale, rng, true);
      if (!std::isfinite(e.bound)) {
        fail(ErrorKind::numeric, "training diverged at epoch " + std::to_string(epoch));
      }
      train_sum += e.bound;
      ++batches;
      // loss = -(bound - penalty)
      std::fill(grad.begin(), grad.end(), 0.0);
      probe::add_elasticnet_grad(theta, config.l1, config.l2, std::span<double>(grad).first(nt));
      for (std::size_t i = 0; i < nt; ++i) grad[i] -= e.grad_theta[i];
      for (std::size_t i = 0; i < np; ++i) grad[nt + i] = -e.grad_phi[i];
      std::copy(theta.theta.begin(), theta.theta.end(), params.begin());
      std::copy(phi.phi.begin(), phi.phi.begin() + static_cast<std::ptrdiff_t>(np), params.begin() + static_cast<std::ptrdiff_t>(nt));
      adam.step(params, grad);
      for (double v : params) {
        if (!std::isfinite(v)) fail(ErrorKind::numeric, "non-finite parameter at epoch " + std::to_string(epoch));
      }
      std::copy(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(nt), theta.theta.begin());
      std::copy(params.begin() + static_cast<std::ptrdiff_t>(nt), params.end(), phi.phi.begin());
    }

    // The holdout bound reuses one sample stream every epoch so successive
    // epochs are compared on the same draws.
    const VariationalFamily q(phi);
    Rng eval_rng(holdout_seed);
    const double hold = config.exact
                            ? exact_estimate(theta, q, ds, eval_rows, config.entropy_scale, false).bound
                            : mc_estimate(theta, q, ds, eval_rows, config.mc_samples,
                                          config.entropy_scale, eval_rng, false)
                                  .bound;
    if (!std::isfinite(hold)) {
      fail(ErrorKind::numeric, "holdout bound is not finite at epoch " + std::to_string(epoch));
    }
    if (hold > best) {
      best = hold;
      out.best_epoch = epoch;
      out.theta = theta;
      out.phi = phi;
    }
    if (hold > last_gain + config.min_delta) {
      last_gain = hold;
      last_gain_epoch = epoch;
    }
    out.log.push_back({epoch, train_sum / static_cast<double>(batches), hold, best});
    if (epoch - last_gain_epoch >= config.patience) {
      out.stop_reason = "patience";
      return out;
    }
  }
  out.stop_reason = "max_epochs";
  return out;
}

TrainedProbe train_probe(const io::ReprDataset& ds, const TrainConfig& config) {
  const auto rows = io::rows_in_split(ds, io::Split::train);
  require(!rows.empty(), ErrorKind::empty, "training split is empty");
  return train_probe(ds, rows, config);
}

std::string format_training_log(const TrainedProbe& tp) {
  std::string out = "epoch\tbound_train\tbound_holdout\tbest_so_far\n";
  for (const auto& e : tp.log) {
    out += std::to_string(e.epoch) + '\t' + util::format_double(e.bound_train) + '\t' +
           util::format_double(e.bound_holdout) + '\t' + util::format_double(e.best_so_far) + '\n';
  }
  return out;
}

}  // namespace latprobe::train
