#include "latprobe/subsets/families.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "latprobe/error.hpp"

namespace latprobe::subsets {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> log_weights_of(std::span<const double> weights) {
  std::vector<double> lw(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    require(weights[i] > 0 && std::isfinite(weights[i]), ErrorKind::domain,
            "conditional Poisson weights must be positive and finite");
    lw[i] = std::log(weights[i]);
  }
  return lw;
}

/// Rolling forward pass: log e_i and the expected sum of log weights, i = 0..k.
struct FixedKPass {
  std::vector<double> log_e;
  std::vector<double> mean;
};

FixedKPass forward_fixed_k(std::span<const double> lw, std::size_t k) {
  FixedKPass p{std::vector<double>(k + 1, kNegInf), std::vector<double>(k + 1, 0.0)};
  p.log_e[0] = 0.0;
  for (std::size_t j = 0; j < lw.size(); ++j) {
    const std::size_t top = std::min(k, j + 1);
    for (std::size_t i = top; i >= 1; --i) {
      const double skip = p.log_e[i];
      const double take = lw[j] + p.log_e[i - 1];
      const double total = log_add_exp(skip, take);
      const double a = skip == kNegInf ? 0.0 : std::exp(skip - total);
      const double b = std::exp(take - total);
      p.mean[i] = a * p.mean[i] + b * (p.mean[i - 1] + lw[j]);
      p.log_e[i] = total;
    }
  }
  return p;
}

void check_subset(const Subset& c, std::size_t dim) {
  if (!c.empty()) {
    require(c.indices().back() < dim, ErrorKind::domain,
            "subset index " + std::to_string(c.indices().back()) + " out of range for |D|=" +
                std::to_string(dim));
  }
}

}  // namespace

std::string_view to_string(FamilyKind k) noexcept {
  switch (k) {
    case FamilyKind::poisson: return "poisson";
    case FamilyKind::cond_poisson: return "cond_poisson";
    case FamilyKind::full_set: return "full_set";
  }
  return "?";
}

FamilyKind parse_family(std::string_view s) {
  if (s == "poisson") return FamilyKind::poisson;
  if (s == "cond_poisson") return FamilyKind::cond_poisson;
  if (s == "full_set" || s == "full") return FamilyKind::full_set;
  fail(ErrorKind::domain, "unknown family '" + std::string(s) + "'");
}

// --- Subset -----------------------------------------------------------------

Subset Subset::of(std::vector<std::size_t> indices, std::size_t universe) {
  std::sort(indices.begin(), indices.end());
  require(std::adjacent_find(indices.begin(), indices.end()) == indices.end(), ErrorKind::domain,
          "subset has duplicate indices");
  Subset s;
  s.idx_ = std::move(indices);
  check_subset(s, universe);
  return s;
}

Subset Subset::all(std::size_t universe) {
  Subset s;
  s.idx_.resize(universe);
  for (std::size_t i = 0; i < universe; ++i) s.idx_[i] = i;
  return s;
}

bool Subset::contains(std::size_t d) const noexcept {
  return std::binary_search(idx_.begin(), idx_.end(), d);
}

std::vector<double> Subset::mask(std::size_t universe) const {
  check_subset(*this, universe);
  std::vector<double> m(universe, 0.0);
  for (std::size_t d : idx_) m[d] = 1.0;
  return m;
}

// --- SizeDistribution ---------------------------------------------------------

SizeDistribution SizeDistribution::uniform(std::size_t universe, std::size_t lo, std::size_t hi) {
  require(lo <= hi && hi <= universe, ErrorKind::domain, "invalid size support");
  SizeDistribution s;
  s.log_prob.assign(universe + 1, kNegInf);
  const double lp = -std::log(static_cast<double>(hi - lo + 1));
  for (std::size_t k = lo; k <= hi; ++k) s.log_prob[k] = lp;
  return s;
}

double SizeDistribution::entropy() const {
  double h = 0.0;
  for (double lp : log_prob) {
    if (lp != kNegInf) h -= std::exp(lp) * lp;
  }
  return h;
}

bool SizeDistribution::supports(std::size_t k) const {
  return k < log_prob.size() && log_prob[k] != kNegInf;
}

std::size_t SizeDistribution::sample(Rng& rng) const {
  const double u = rng.uniform();
  double cdf = 0.0;
  std::size_t last = 0;
  for (std::size_t k = 0; k < log_prob.size(); ++k) {
    if (log_prob[k] == kNegInf) continue;
    last = k;
    cdf += std::exp(log_prob[k]);
    if (u < cdf) return k;
  }
  return last;
}

// --- SubsetFamilyParams -------------------------------------------------------

void SubsetFamilyParams::validate() const {
  require(!phi.empty(), ErrorKind::domain, "family needs |D| >= 1");
  for (double p : phi) require(std::isfinite(p), ErrorKind::domain, "phi must be finite");
  if (kind == FamilyKind::cond_poisson) {
    require(size_dist.log_prob.size() == phi.size() + 1, ErrorKind::domain,
            "size distribution must cover sizes 0..|D|");
    double total = 0.0;
    for (double lp : size_dist.log_prob) total += std::exp(lp);
    require(std::abs(total - 1.0) <= 1e-9, ErrorKind::domain, "size distribution must sum to 1");
  }
}

SubsetFamilyParams SubsetFamilyParams::poisson(std::vector<double> phi) {
  SubsetFamilyParams p{FamilyKind::poisson, std::move(phi), {}};
  p.validate();
  return p;
}

SubsetFamilyParams SubsetFamilyParams::cond_poisson(std::vector<double> phi) {
  const std::size_t d = phi.size();
  SubsetFamilyParams p{FamilyKind::cond_poisson, std::move(phi), SizeDistribution::uniform(d)};
  p.validate();
  return p;
}

SubsetFamilyParams SubsetFamilyParams::full_set(std::size_t dim) {
  SubsetFamilyParams p{FamilyKind::full_set, std::vector<double>(dim, 0.0), {}};
  p.validate();
  return p;
}

// --- Poisson ------------------------------------------------------------------

double poisson_log_prob(const SubsetFamilyParams& params, const Subset& c) {
  require(params.kind == FamilyKind::poisson, ErrorKind::domain, "not a Poisson family");
  check_subset(c, params.dim());
  double lp = 0.0;
  auto it = c.begin();
  for (std::size_t d = 0; d < params.dim(); ++d) {
    const bool in = it != c.end() && *it == d;
    if (in) ++it;
    // log(w/(1+w)) = -softplus(-phi), log(1/(1+w)) = -softplus(phi)
    lp -= in ? softplus(-params.phi[d]) : softplus(params.phi[d]);
  }
  return lp;
}

double poisson_entropy(const SubsetFamilyParams& params) {
  require(params.kind == FamilyKind::poisson, ErrorKind::domain, "not a Poisson family");
  double log_z = 0.0, expected = 0.0;
  for (double p : params.phi) {
    log_z += softplus(p);
    expected += sigmoid(p) * p;
  }
  return log_z - expected;
}

Subset poisson_sample(const SubsetFamilyParams& params, Rng& rng) {
  require(params.kind == FamilyKind::poisson, ErrorKind::domain, "not a Poisson family");
  std::vector<std::size_t> idx;
  for (std::size_t d = 0; d < params.dim(); ++d) {
    if (rng.uniform() < sigmoid(params.phi[d])) idx.push_back(d);
  }
  return Subset::of(std::move(idx), params.dim());
}

// --- Conditional Poisson ------------------------------------------------------

double log_cp_partition(std::span<const double> log_weights, std::size_t k) {
  require(k <= log_weights.size(), ErrorKind::domain,
          "k=" + std::to_string(k) + " exceeds |D|=" + std::to_string(log_weights.size()));
  return forward_fixed_k(log_weights, k).log_e[k];
}

double cp_partition(std::span<const double> weights, std::size_t k) {
  const auto lw = log_weights_of(weights);
  return std::exp(log_cp_partition(lw, k));
}

double cp_log_prob(const SubsetFamilyParams& params, const Subset& c) {
  require(params.kind == FamilyKind::cond_poisson, ErrorKind::domain,
          "not a conditional Poisson family");
  check_subset(c, params.dim());
  const std::size_t k = c.size();
  if (!params.size_dist.supports(k)) return kNegInf;
  double lp = params.size_dist.log_prob[k];
  for (std::size_t d : c) lp += params.phi[d];
  return lp - log_cp_partition(params.phi, k);
}

double cp_entropy_fixed_k(std::span<const double> weights, std::size_t k) {
  require(k <= weights.size(), ErrorKind::domain, "k exceeds |D|");
  const auto lw = log_weights_of(weights);
  const auto pass = forward_fixed_k(lw, k);
  return pass.log_e[k] - pass.mean[k];
}

double cp_family_entropy(const SubsetFamilyParams& params) {
  require(params.kind == FamilyKind::cond_poisson, ErrorKind::domain,
          "not a conditional Poisson family");
  return VariationalFamily(params).entropy();
}

Subset cp_sample(const SubsetFamilyParams& params, Rng& rng) {
  require(params.kind == FamilyKind::cond_poisson, ErrorKind::domain,
          "not a conditional Poisson family");
  return VariationalFamily(params).sample(rng);
}

std::vector<double> family_grad_phi_entropy(const SubsetFamilyParams& params) {
  return VariationalFamily(params).grad_entropy();
}

// --- VariationalFamily ----------------------------------------------------------

VariationalFamily::VariationalFamily(SubsetFamilyParams params) : params_(std::move(params)) {
  params_.validate();
  const std::size_t n = dim();
  const auto& lw = params_.phi;
  if (params_.kind == FamilyKind::poisson) {
    sigma_.resize(n);
    for (std::size_t d = 0; d < n; ++d) sigma_[d] = sigmoid(lw[d]);
    return;
  }
  if (params_.kind != FamilyKind::cond_poisson) return;

  const std::size_t w = n + 1;
  log_pre_.assign(w * w, kNegInf);
  mean_pre_.assign(w * w, 0.0);
  log_suf_.assign(w * w, kNegInf);
  mean_suf_.assign(w * w, 0.0);

  // Forward: item j-1 is appended to the prefix of length j-1.
  log_pre_[at(0, 0)] = 0.0;
  for (std::size_t j = 1; j <= n; ++j) {
    log_pre_[at(j, 0)] = 0.0;
    for (std::size_t i = 1; i <= j; ++i) {
      const double skip = log_pre_[at(j - 1, i)];
      const double take = lw[j - 1] + log_pre_[at(j - 1, i - 1)];
      const double total = log_add_exp(skip, take);
      const double a = skip == kNegInf ? 0.0 : std::exp(skip - total);
      const double b = std::exp(take - total);
      log_pre_[at(j, i)] = total;
      mean_pre_[at(j, i)] = a * mean_pre_[at(j - 1, i)] + b * (mean_pre_[at(j - 1, i - 1)] + lw[j - 1]);
    }
  }
  // Backward: suffix starting at item j.
  log_suf_[at(n, 0)] = 0.0;
  for (std::size_t j = n; j-- > 0;) {
    log_suf_[at(j, 0)] = 0.0;
    for (std::size_t i = 1; i <= n - j; ++i) {
      const double skip = log_suf_[at(j + 1, i)];
      const double take = lw[j] + log_suf_[at(j + 1, i - 1)];
      const double total = log_add_exp(skip, take);
      const double a = skip == kNegInf ? 0.0 : std::exp(skip - total);
      const double b = std::exp(take - total);
      log_suf_[at(j, i)] = total;
      mean_suf_[at(j, i)] = a * mean_suf_[at(j + 1, i)] + b * (mean_suf_[at(j + 1, i - 1)] + lw[j]);
    }
  }

  // Inclusion probabilities and conditional expected log-weight sums per size.
  incl_.assign(w * n, 0.0);
  cond_sum_.assign(w * n, 0.0);
  std::vector<double> terms(n);
  for (std::size_t k = 1; k <= n; ++k) {
    const double log_z = log_pre_[at(n, k)];
    for (std::size_t d = 0; d < n; ++d) {
      // Size k-1 subsets of D \ {d}: i items from the prefix [0, d), k-1-i from (d, n).
      double log_rest = kNegInf;
      double best = kNegInf;
      const std::size_t lo = (k - 1) > (n - d - 1) ? (k - 1) - (n - d - 1) : 0;
      const std::size_t hi = std::min(k - 1, d);
      for (std::size_t i = lo; i <= hi; ++i) {
        terms[i] = log_pre_[at(d, i)] + log_suf_[at(d + 1, k - 1 - i)];
        best = std::max(best, terms[i]);
      }
      if (best == kNegInf) continue;
      double z = 0.0, m = 0.0;
      for (std::size_t i = lo; i <= hi; ++i) {
        const double e = std::exp(terms[i] - best);
        z += e;
        m += e * (mean_pre_[at(d, i)] + mean_suf_[at(d + 1, k - 1 - i)]);
      }
      log_rest = best + std::log(z);
      incl_[k * n + d] = std::min(1.0, std::exp(lw[d] + log_rest - log_z));
      cond_sum_[k * n + d] = lw[d] + m / z;
    }
  }
}

double VariationalFamily::entropy_fixed_k(std::size_t k) const {
  return log_pre_[at(dim(), k)] - mean_pre_[at(dim(), k)];
}

double VariationalFamily::log_prob(const Subset& c) const {
  switch (params_.kind) {
    case FamilyKind::poisson: return poisson_log_prob(params_, c);
    case FamilyKind::full_set:
      check_subset(c, dim());
      return c.size() == dim() ? 0.0 : kNegInf;
    case FamilyKind::cond_poisson: {
      check_subset(c, dim());
      const std::size_t k = c.size();
      if (!params_.size_dist.supports(k)) return kNegInf;
      double lp = params_.size_dist.log_prob[k];
      for (std::size_t d : c) lp += params_.phi[d];
      return lp - log_pre_[at(dim(), k)];
    }
  }
  return kNegInf;
}

double VariationalFamily::entropy() const {
  switch (params_.kind) {
    case FamilyKind::poisson: return poisson_entropy(params_);
    case FamilyKind::full_set: return 0.0;
    case FamilyKind::cond_poisson: {
      double h = params_.size_dist.entropy();
      for (std::size_t k = 0; k <= dim(); ++k) {
        if (params_.size_dist.supports(k)) h += std::exp(params_.size_dist.log_prob[k]) * entropy_fixed_k(k);
      }
      return h;
    }
  }
  return 0.0;
}

std::vector<double> VariationalFamily::grad_entropy() const {
  const std::size_t n = dim();
  std::vector<double> g(n, 0.0);
  if (params_.kind == FamilyKind::poisson) {
    // d/dphi [softplus(phi) - sigmoid(phi) phi] = -sigmoid(phi)(1 - sigmoid(phi)) phi
    for (std::size_t d = 0; d < n; ++d) g[d] = -sigma_[d] * (1.0 - sigma_[d]) * params_.phi[d];
  } else if (params_.kind == FamilyKind::cond_poisson) {
    // dH_k/dphi_d = -Cov(sum_{e in C} phi_e, 1{d in C}) under the size-k design.
    for (std::size_t k = 1; k <= n; ++k) {
      if (!params_.size_dist.supports(k)) continue;
      const double qk = std::exp(params_.size_dist.log_prob[k]);
      const double mean_k = mean_pre_[at(n, k)];
      for (std::size_t d = 0; d < n; ++d) {
        g[d] -= qk * incl_[k * n + d] * (cond_sum_[k * n + d] - mean_k);
      }
    }
  }
  return g;
}

Subset VariationalFamily::sample(Rng& rng) const {
  std::vector<double> mask(dim());
  sample_mask(rng, mask);
  std::vector<std::size_t> idx;
  for (std::size_t d = 0; d < dim(); ++d) {
    if (mask[d] != 0.0) idx.push_back(d);
  }
  return Subset::of(std::move(idx), dim());
}

std::size_t VariationalFamily::sample_mask(Rng& rng, std::span<double> mask) const {
  const std::size_t n = dim();
  std::size_t size = 0;
  switch (params_.kind) {
    case FamilyKind::full_set:
      std::fill(mask.begin(), mask.end(), 1.0);
      return n;
    case FamilyKind::poisson:
      for (std::size_t d = 0; d < n; ++d) {
        const bool in = rng.uniform() < sigma_[d];
        mask[d] = in ? 1.0 : 0.0;
        size += in;
      }
      return size;
    case FamilyKind::cond_poisson: {
      const std::size_t k = params_.size_dist.sample(rng);
      std::size_t remaining = k;
      for (std::size_t d = 0; d < n; ++d) {
        bool in = false;
        if (remaining > 0) {
          if (n - d == remaining) {
            in = true;
          } else {
            const double p = std::exp(params_.phi[d] + log_suf_[at(d + 1, remaining - 1)] -
                                      log_suf_[at(d, remaining)]);
            in = rng.uniform() < p;
          }
        }
        mask[d] = in ? 1.0 : 0.0;
        remaining -= in;
      }
      return k;
    }
  }
  return size;
}

void VariationalFamily::add_grad_log_prob(std::span<const double> mask, std::size_t size,
                                          double scale, std::span<double> out) const {
  const std::size_t n = dim();
  if (params_.kind == FamilyKind::poisson) {
    for (std::size_t d = 0; d < n; ++d) out[d] += scale * (mask[d] - sigma_[d]);
  } else if (params_.kind == FamilyKind::cond_poisson) {
    const double* pi = incl_.data() + size * n;
    for (std::size_t d = 0; d < n; ++d) out[d] += scale * (mask[d] - pi[d]);
  }
}

std::vector<double> VariationalFamily::marginal_inclusion() const {
  const std::size_t n = dim();
  std::vector<double> p(n, 0.0);
  switch (params_.kind) {
    case FamilyKind::full_set: std::fill(p.begin(), p.end(), 1.0); break;
    case FamilyKind::poisson: p = sigma_; break;
    case FamilyKind::cond_poisson:
      for (std::size_t k = 1; k <= n; ++k) {
        if (!params_.size_dist.supports(k)) continue;
        const double qk = std::exp(params_.size_dist.log_prob[k]);
        for (std::size_t d = 0; d < n; ++d) p[d] += qk * incl_[k * n + d];
      }
      break;
  }
  return p;
}

}  // namespace latprobe::subsets
