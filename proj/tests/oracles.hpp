#pragma once

// Independent reference computations used only by tests: brute-force
// enumeration over subsets and finite differences. Nothing here calls into
// the dynamic programs or closed forms it is used to check.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "latprobe/rng.hpp"

namespace oracle {

/// All subsets of {0..n-1} as sorted index lists, by bitmask order.
inline std::vector<std::vector<std::size_t>> all_subsets(std::size_t n) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    std::vector<std::size_t> s;
    for (std::size_t d = 0; d < n; ++d) {
      if (mask >> d & 1u) s.push_back(d);
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// Product of independent Bernoulli(w/(1+w)) terms, computed directly.
inline double poisson_prob(const std::vector<double>& phi, const std::vector<std::size_t>& c) {
  double p = 1.0;
  std::size_t j = 0;
  for (std::size_t d = 0; d < phi.size(); ++d) {
    const double w = std::exp(phi[d]);
    const bool in = j < c.size() && c[j] == d;
    if (in) ++j;
    p *= in ? w / (1.0 + w) : 1.0 / (1.0 + w);
  }
  return p;
}

/// e_k(w) by summing products over every size-k subset, in long double.
inline long double esp_brute(const std::vector<double>& w, std::size_t k) {
  const std::size_t n = w.size();
  long double total = 0.0L;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcountll(mask)) != k) continue;
    long double prod = 1.0L;
    for (std::size_t d = 0; d < n; ++d) {
      if (mask >> d & 1u) prod *= static_cast<long double>(w[d]);
    }
    total += prod;
  }
  return total;
}

/// e_0..e_n(w) from one pass over all 2^n subsets, in long double.
inline std::vector<long double> esp_all(const std::vector<double>& w) {
  const std::size_t n = w.size();
  std::vector<long double> e(n + 1, 0.0L);
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    long double prod = 1.0L;
    for (std::size_t d = 0; d < n; ++d) {
      if (mask >> d & 1u) prod *= static_cast<long double>(w[d]);
    }
    e[static_cast<std::size_t>(__builtin_popcountll(mask))] += prod;
  }
  return e;
}

/// Conditional Poisson probability with uniform sizes over {1..n}.
inline double cp_prob(const std::vector<double>& phi, const std::vector<std::size_t>& c) {
  const std::size_t n = phi.size();
  if (c.empty()) return 0.0;
  std::vector<double> w(n);
  for (std::size_t d = 0; d < n; ++d) w[d] = std::exp(phi[d]);
  double prod = 1.0;
  for (std::size_t d : c) prod *= w[d];
  return static_cast<double>(prod / esp_brute(w, c.size())) / static_cast<double>(n);
}

inline double entropy(const std::vector<double>& probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0) h -= p * std::log(p);
  }
  return h;
}

/// Central differences of f at x with step h.
inline std::vector<double> finite_diff(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double up = f(x);
    x[i] = x0 - h;
    const double down = f(x);
    x[i] = x0;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

inline std::vector<double> random_vector(latprobe::Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

/// C(n, r) by the multiplicative formula in long double.
inline long double choose(std::size_t n, std::size_t r) {
  if (r > n) return 0.0L;
  long double c = 1.0L;
  for (std::size_t i = 1; i <= r; ++i) c = c * static_cast<long double>(n - r + i) / i;
  return c;
}

/// Hypergeometric upper tail sum_{j>=m} C(k,j) C(d-k,k-j) / C(d,k).
inline double hypergeom_tail(std::size_t m, std::size_t k, std::size_t d) {
  long double t = 0.0L;
  for (std::size_t j = m; j <= k; ++j) t += choose(k, j) * choose(d - k, k - j);
  return static_cast<double>(t / choose(d, k));
}

}  // namespace oracle
