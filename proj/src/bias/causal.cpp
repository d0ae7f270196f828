#include "latprobe/bias/causal.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

#include "latprobe/error.hpp"
#include "latprobe/parallel.hpp"
#include "latprobe/rng.hpp"

namespace latprobe::bias {

namespace {

void check_distribution(const std::vector<double>& p, const char* what) {
  double s = 0.0;
  for (double v : p) {
    require(v >= 0.0 && std::isfinite(v), ErrorKind::domain, std::string(what) + " has a negative entry");
    s += v;
  }
  require(std::abs(s - 1.0) <= 1e-9, ErrorKind::domain, std::string(what) + " does not sum to 1");
}

}  // namespace

void DiscreteJoint::validate() const {
  require(p.size() == n_a * n_g && !p.empty(), ErrorKind::shape, "joint table has the wrong size");
  check_distribution(p, "joint table");
}

double discrete_mi(const DiscreteJoint& joint) {
  joint.validate();
  std::vector<double> pa(joint.n_a, 0.0), pg(joint.n_g, 0.0);
  for (std::size_t a = 0; a < joint.n_a; ++a) {
    for (std::size_t g = 0; g < joint.n_g; ++g) {
      pa[a] += joint.at(a, g);
      pg[g] += joint.at(a, g);
    }
  }
  double mi = 0.0;
  for (std::size_t a = 0; a < joint.n_a; ++a) {
    for (std::size_t g = 0; g < joint.n_g; ++g) {
      const double p = joint.at(a, g);
      if (p > 0.0) mi += p * std::log(p / (pa[a] * pg[g]));
    }
  }
  return std::max(mi, 0.0);
}

double weighted_jsd(const std::vector<std::vector<double>>& dists, const std::vector<double>& pi) {
  require(dists.size() == pi.size() && !pi.empty(), ErrorKind::domain,
          "one weight per distribution is required");
  check_distribution(pi, "weights");
  const std::size_t n = dists.front().size();
  std::vector<double> m(n, 0.0);
  for (std::size_t i = 0; i < dists.size(); ++i) {
    require(dists[i].size() == n, ErrorKind::domain, "distributions have different supports");
    check_distribution(dists[i], "distribution");
    for (std::size_t a = 0; a < n; ++a) m[a] += pi[i] * dists[i][a];
  }
  double jsd = 0.0;
  for (std::size_t i = 0; i < dists.size(); ++i) {
    if (pi[i] == 0.0) continue;
    double kl = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      const double p = dists[i][a];
      if (p > 0.0) kl += p * std::log(p / m[a]);
    }
    jsd += pi[i] * kl;
  }
  return std::max(jsd, 0.0);
}

const ConditionalTable::Row* ConditionalTable::find(std::size_t g, std::size_t n) const {
  for (const auto& r : rows) {
    if (r.g == g && r.n == n) return &r;
  }
  return nullptr;
}

void ConditionalTable::validate() const {
  require(n_outcomes >= 1, ErrorKind::domain, "table needs at least one outcome");
  check_distribution(p_noun, "noun marginal");
  check_distribution(p_gender, "gender marginal");
  require(!rows.empty(), ErrorKind::empty, "table has no rows");
  std::set<std::pair<std::size_t, std::size_t>> keys;
  for (const auto& r : rows) {
    require(r.g < n_genders() && r.n < n_nouns(), ErrorKind::domain, "row context out of range");
    require(keys.emplace(r.g, r.n).second, ErrorKind::domain, "duplicate (gender, noun) row");
    require(r.dist.size() == n_outcomes, ErrorKind::shape, "row has the wrong number of outcomes");
    check_distribution(r.dist, "table row");
  }
}

DiscreteJoint observational_marginal(const ConditionalTable& ct) {
  ct.validate();
  DiscreteJoint j{ct.n_outcomes, ct.n_genders(), std::vector<double>(ct.n_outcomes * ct.n_genders(), 0.0)};
  double total = 0.0;
  for (const auto& r : ct.rows) {
    const double w = ct.p_noun[r.n];
    for (std::size_t a = 0; a < ct.n_outcomes; ++a) j.p[a * j.n_g + r.g] += w * r.dist[a];
    total += w;
  }
  require(total > 0.0, ErrorKind::undefined, "held contexts have zero noun mass");
  for (auto& v : j.p) v /= total;
  return j;
}

std::vector<double> interventional_marginal(const ConditionalTable& ct, std::size_t g) {
  require(g < ct.n_genders(), ErrorKind::domain, "gender index out of range");
  std::vector<double> out(ct.n_outcomes, 0.0);
  for (std::size_t n = 0; n < ct.n_nouns(); ++n) {
    const auto* r = ct.find(g, n);
    require(r != nullptr, ErrorKind::domain,
            "no row for gender " + std::to_string(g) + ", noun " + std::to_string(n));
    for (std::size_t a = 0; a < ct.n_outcomes; ++a) out[a] += ct.p_noun[n] * r->dist[a];
  }
  return out;
}

DiscreteJoint interventional_joint(const ConditionalTable& ct) {
  ct.validate();
  DiscreteJoint j{ct.n_outcomes, ct.n_genders(), std::vector<double>(ct.n_outcomes * ct.n_genders(), 0.0)};
  for (std::size_t g = 0; g < ct.n_genders(); ++g) {
    const auto m = interventional_marginal(ct, g);
    for (std::size_t a = 0; a < ct.n_outcomes; ++a) j.p[a * j.n_g + g] = m[a] * ct.p_gender[g];
  }
  return j;
}

double mi_do(const ConditionalTable& ct) {
  ct.validate();
  std::vector<std::vector<double>> dists;
  for (std::size_t g = 0; g < ct.n_genders(); ++g) dists.push_back(interventional_marginal(ct, g));
  return weighted_jsd(dists, ct.p_gender);
}

ConditionalTable table_from_observations(const std::vector<Observation>& obs, std::size_t n_genders,
                                         std::size_t n_nouns, std::size_t n_outcomes,
                                         double smoothing) {
  require(!obs.empty(), ErrorKind::empty, "no observations");
  require(smoothing >= 0.0, ErrorKind::domain, "smoothing must be >= 0");
  std::vector<double> counts(n_genders * n_nouns * n_outcomes, 0.0);
  ConditionalTable ct;
  ct.n_outcomes = n_outcomes;
  ct.p_noun.assign(n_nouns, 0.0);
  ct.p_gender.assign(n_genders, 0.0);
  for (const auto& o : obs) {
    require(o.g < n_genders && o.n < n_nouns && o.a < n_outcomes, ErrorKind::domain,
            "observation index out of range");
    counts[(o.g * n_nouns + o.n) * n_outcomes + o.a] += 1.0;
    ct.p_noun[o.n] += 1.0;
    ct.p_gender[o.g] += 1.0;
  }
  const double total = static_cast<double>(obs.size());
  for (auto& v : ct.p_noun) v /= total;
  for (auto& v : ct.p_gender) v /= total;
  for (std::size_t g = 0; g < n_genders; ++g) {
    for (std::size_t n = 0; n < n_nouns; ++n) {
      const double* c = counts.data() + (g * n_nouns + n) * n_outcomes;
      double z = 0.0;
      for (std::size_t a = 0; a < n_outcomes; ++a) z += c[a] + smoothing;
      if (z == 0.0) continue;
      ConditionalTable::Row r{g, n, std::vector<double>(n_outcomes)};
      for (std::size_t a = 0; a < n_outcomes; ++a) r.dist[a] = (c[a] + smoothing) / z;
      ct.rows.push_back(std::move(r));
    }
  }
  return ct;
}

double label_permutation_test(const std::function<double(const std::vector<std::size_t>&)>& stat,
                              const std::vector<std::size_t>& labels, std::size_t n_perm,
                              std::uint64_t seed, std::size_t jobs) {
  require(n_perm >= 1, ErrorKind::domain, "n_perm must be positive");
  const double observed = stat(labels);
  std::vector<char> hit(n_perm, 0);
  parallel_for(n_perm, jobs, [&](std::size_t r) {
    Rng rng(derive_seed(seed, r));
    auto shuffled = labels;
    rng.shuffle(shuffled.begin(), shuffled.end());
    hit[r] = stat(shuffled) >= observed;
  });
  const auto count = static_cast<double>(std::count(hit.begin(), hit.end(), 1));
  return (1.0 + count) / (static_cast<double>(n_perm) + 1.0);
}

}  // namespace latprobe::bias
