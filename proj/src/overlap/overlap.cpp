#include "latprobe/overlap/overlap.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "latprobe/error.hpp"
#include "latprobe/parallel.hpp"
#include "latprobe/util/tsv.hpp"

namespace latprobe::overlap {

Overlap topk_overlap(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  require(a.size() == b.size(), ErrorKind::domain,
          "top-k sets differ in size (" + std::to_string(a.size()) + " vs " +
              std::to_string(b.size()) + ")");
  require(!a.empty(), ErrorKind::domain, "top-k sets are empty");
  const std::set<std::size_t> sa(a.begin(), a.end());
  const std::set<std::size_t> sb(b.begin(), b.end());
  require(sa.size() == a.size() && sb.size() == b.size(), ErrorKind::domain,
          "top-k set contains duplicates");
  Overlap o;
  for (std::size_t x : sa) o.m += sb.count(x);
  o.pct = static_cast<double>(o.m) / static_cast<double>(a.size());
  return o;
}

namespace {

void check_bounds(std::size_t m, std::size_t k, std::size_t d) {
  require(m <= k && k <= d, ErrorKind::domain,
          "overlap bounds need 0 <= m <= k <= D (m=" + std::to_string(m) + ", k=" +
              std::to_string(k) + ", D=" + std::to_string(d) + ")");
}

long double log_choose(std::size_t n, std::size_t r) {
  return std::lgamma(static_cast<long double>(n) + 1) - std::lgamma(static_cast<long double>(r) + 1) -
         std::lgamma(static_cast<long double>(n - r) + 1);
}

}  // namespace

double overlap_pvalue_exact(std::size_t m, std::size_t k, std::size_t d) {
  check_bounds(m, k, d);
  if (m == 0) return 1.0;
  // overlap j needs k - j <= d - k
  const std::size_t lo = 2 * k > d ? 2 * k - d : 0;
  const long double norm = log_choose(d, k);
  long double tail = 0.0L, total = 0.0L;
  for (std::size_t j = lo; j <= k; ++j) {
    const long double t = std::exp(log_choose(k, j) + log_choose(d - k, k - j) - norm);
    total += t;
    if (j >= m) tail += t;
  }
  return static_cast<double>(std::clamp(tail / total, 0.0L, 1.0L));
}

double overlap_pvalue_permutation(std::size_t m, std::size_t k, std::size_t d,
                                  std::size_t n_perm, Rng& rng) {
  check_bounds(m, k, d);
  require(n_perm >= 1, ErrorKind::domain, "n_perm must be positive");
  // A is fixed to {0..k-1}; B is a fresh uniform k-subset from a partial shuffle.
  std::vector<std::size_t> perm(d);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < n_perm; ++r) {
    std::size_t overlap = 0;
    for (std::size_t i = 0; i < k; ++i) {
      std::swap(perm[i], perm[i + rng.index(d - i)]);
      overlap += perm[i] < k;
    }
    hits += overlap >= m;
  }
  return static_cast<double>(hits) / static_cast<double>(n_perm);
}

std::vector<bool> holm_bonferroni(const std::vector<double>& p, double alpha) {
  for (double v : p) {
    require(v >= 0.0 && v <= 1.0, ErrorKind::domain, "p-values must lie in [0, 1]");
  }
  require(alpha >= 0.0 && alpha <= 1.0, ErrorKind::domain, "alpha must lie in [0, 1]");
  const std::size_t t = p.size();
  std::vector<std::size_t> order(t);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::vector<bool> reject(t, false);
  for (std::size_t i = 0; i < t; ++i) {
    if (p[order[i]] > alpha / static_cast<double>(t - i)) break;
    reject[order[i]] = true;
  }
  return reject;
}

std::vector<OverlapResult> overlap_matrix(const std::vector<RunSelection>& runs, std::size_t k,
                                          double alpha, const PvalueConfig& method,
                                          std::size_t jobs) {
  std::vector<OverlapResult> out;
  if (runs.empty()) return out;
  const std::size_t d = runs.front().universe;
  for (const auto& r : runs) {
    require(r.universe == d, ErrorKind::domain,
            "run '" + r.name + "' has universe " + std::to_string(r.universe) + ", expected " +
                std::to_string(d));
    require(r.dims.size() >= k, ErrorKind::domain,
            "run '" + r.name + "' selected " + std::to_string(r.dims.size()) +
                " dims, fewer than k=" + std::to_string(k));
  }
  require(k >= 1 && k <= d, ErrorKind::domain, "k must lie in [1, D]");
  for (std::size_t a = 0; a < runs.size(); ++a) {
    for (std::size_t b = a + 1; b < runs.size(); ++b) out.push_back({a, b, k, d});
  }
  parallel_for(out.size(), jobs, [&](std::size_t i) {
    auto& r = out[i];
    const auto& da = runs[r.run_a].dims;
    const auto& db = runs[r.run_b].dims;
    const Overlap o = topk_overlap({da.begin(), da.begin() + static_cast<std::ptrdiff_t>(k)},
                                   {db.begin(), db.begin() + static_cast<std::ptrdiff_t>(k)});
    r.m = o.m;
    r.pct = o.pct;
    if (method.method == PvalueMethod::exact) {
      r.p_raw = overlap_pvalue_exact(o.m, k, d);
    } else {
      Rng rng(derive_seed(method.seed, i));
      r.p_raw = overlap_pvalue_permutation(o.m, k, d, method.n_perm, rng);
    }
  });
  std::vector<double> p;
  for (const auto& r : out) p.push_back(r.p_raw);
  const auto rej = holm_bonferroni(p, alpha);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].reject = rej[i];
  return out;
}

std::string format_overlap(const std::vector<RunSelection>& runs,
                           const std::vector<OverlapResult>& results) {
  std::string s = "run_a\trun_b\tm\tpct\tp_raw\treject\n";
  auto line = [&](const OverlapResult& r, std::size_t a, std::size_t b) {
    s += runs[a].name + '\t' + runs[b].name + '\t' + std::to_string(r.m) + '\t' +
         util::format_double(r.pct) + '\t' + util::format_double(r.p_raw) + '\t' +
         (r.reject ? "1" : "0") + '\n';
  };
  for (const auto& r : results) {
    line(r, r.run_a, r.run_b);
    line(r, r.run_b, r.run_a);
  }
  return s;
}

}  // namespace latprobe::overlap
