#include "latprobe/probe/gaussian.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <numbers>

#include "latprobe/error.hpp"
#include "latprobe/simd/kernels.hpp"

namespace latprobe::probe {

GaussianProbe gaussian_probe_fit(const io::ReprDataset& ds, std::span<const std::size_t> rows,
                                 double shrinkage) {
  require(shrinkage >= 0.0 && shrinkage <= 1.0, ErrorKind::domain, "shrinkage must be in [0, 1]");
  const std::size_t d = ds.dim;
  const std::size_t nc = ds.inventory.size();
  GaussianProbe m;
  m.dim = d;
  m.shrinkage = shrinkage;
  m.classes = ds.inventory;
  m.means.assign(nc, std::vector<double>(d, 0.0));
  m.covs.assign(nc, std::vector<double>(d * d, 0.0));
  std::vector<std::size_t> count(nc, 0);

  for (std::size_t r : rows) {
    const auto h = ds.row(r);
    const std::size_t c = ds.labels[r];
    ++count[c];
    simd::axpy(1.0, h, m.means[c]);
  }
  for (std::size_t c = 0; c < nc; ++c) {
    require(count[c] >= 2, ErrorKind::domain,
            "class '" + m.classes[c] + "' has " + std::to_string(count[c]) +
                " training rows; the Gaussian probe needs at least 2");
    for (auto& v : m.means[c]) v /= static_cast<double>(count[c]);
  }
  std::vector<double> centered(d);
  for (std::size_t r : rows) {
    const auto h = ds.row(r);
    const std::size_t c = ds.labels[r];
    for (std::size_t i = 0; i < d; ++i) centered[i] = h[i] - m.means[c][i];
    auto& s = m.covs[c];
    for (std::size_t i = 0; i < d; ++i) {
      simd::axpy(centered[i], centered, std::span<double>(s).subspan(i * d, d));
    }
  }
  const double total = static_cast<double>(rows.size());
  for (std::size_t c = 0; c < nc; ++c) {
    m.log_prior.push_back(std::log(static_cast<double>(count[c]) / total));
    auto& s = m.covs[c];
    const double denom = static_cast<double>(count[c]);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        s[i * d + j] /= denom;
        if (i != j) s[i * d + j] *= 1.0 - shrinkage;
      }
    }
  }
  return m;
}

GaussianView::GaussianView(const GaussianProbe& model, const subsets::Subset& c)
    : k_(c.size()), idx_(c.indices()), log_prior_(model.log_prior) {
  const std::size_t d = model.dim;
  for (std::size_t i : idx_) require(i < d, ErrorKind::shape, "subset index outside the model");
  for (std::size_t cls = 0; cls < model.classes.size(); ++cls) {
    Eigen::MatrixXd sigma(k_, k_);
    std::vector<double> mu(k_);
    for (std::size_t a = 0; a < k_; ++a) {
      mu[a] = model.means[cls][idx_[a]];
      for (std::size_t b = 0; b < k_; ++b) sigma(a, b) = model.covs[cls][idx_[a] * d + idx_[b]];
    }
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) {
      fail(ErrorKind::numeric, "covariance of class '" + model.classes[cls] +
                                   "' is singular after shrinkage");
    }
    const Eigen::MatrixXd l = llt.matrixL();
    double logdet = 0.0;
    for (std::size_t a = 0; a < k_; ++a) {
      if (!(l(a, a) > 0.0)) {
        fail(ErrorKind::numeric, "covariance of class '" + model.classes[cls] + "' is singular");
      }
      logdet += 2.0 * std::log(l(a, a));
    }
    const Eigen::MatrixXd inv =
        l.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(k_, k_));
    std::vector<double> flat(k_ * k_);
    for (std::size_t a = 0; a < k_; ++a) {
      for (std::size_t b = 0; b < k_; ++b) flat[a * k_ + b] = inv(a, b);
    }
    mean_.push_back(std::move(mu));
    inv_l_.push_back(std::move(flat));
    log_norm_.push_back(-0.5 * (logdet + static_cast<double>(k_) * std::log(2.0 * std::numbers::pi)));
  }
}

std::vector<double> GaussianView::log_probs(std::span<const double> h) const {
  const std::size_t nc = log_prior_.size();
  std::vector<double> joint(nc), diff(k_), z(k_);
  for (std::size_t c = 0; c < nc; ++c) {
    for (std::size_t a = 0; a < k_; ++a) diff[a] = h[idx_[a]] - mean_[c][a];
    simd::gemv(inv_l_[c], diff, {}, z);
    joint[c] = log_prior_[c] + log_norm_[c] - 0.5 * simd::dot(z, z);
  }
  double mx = joint[0];
  for (double v : joint) mx = std::max(mx, v);
  double s = 0.0;
  for (double v : joint) s += std::exp(v - mx);
  const double lse = mx + std::log(s);
  for (auto& v : joint) v -= lse;
  return joint;
}

std::vector<double> gaussian_probe_log_probs(const GaussianProbe& model, std::span<const double> h,
                                             const subsets::Subset& c) {
  require(h.size() == model.dim, ErrorKind::shape, "representation length does not match model");
  return GaussianView(model, c).log_probs(h);
}

}  // namespace latprobe::probe
