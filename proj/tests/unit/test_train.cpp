#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "latprobe/error.hpp"
#include "latprobe/train/train.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace latprobe;
using namespace latprobe::train;
using probe::Arch;
using subsets::Subset;
using subsets::SubsetFamilyParams;
using testutil::error_kind_of;

namespace {

io::ReprDataset gaussian_data(Rng& rng, std::size_t n, std::size_t dim,
                              const std::function<std::string(const std::vector<double>&)>& label) {
  std::vector<double> m;
  std::vector<std::string> labels, lemmas;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> h(dim);
    for (auto& v : h) v = rng.normal();
    m.insert(m.end(), h.begin(), h.end());
    labels.push_back(label(h));
    lemmas.push_back("w" + std::to_string(i));
  }
  return io::make_dataset(dim, std::move(m), labels, std::move(lemmas));
}

std::vector<std::size_t> iota_rows(std::size_t n) {
  std::vector<std::size_t> r(n);
  std::iota(r.begin(), r.end(), 0);
  return r;
}

// E_q[mean_n log p(pi_n | h_n, C)] by enumeration with oracle subset probabilities.
double brute_expected_loglik(const probe::ProbeParams& theta, const SubsetFamilyParams& phi,
                             const io::ReprDataset& ds, const std::vector<std::size_t>& rows) {
  double total = 0.0;
  for (const auto& c : oracle::all_subsets(ds.dim)) {
    const double qc = phi.kind == subsets::FamilyKind::poisson ? oracle::poisson_prob(phi.phi, c)
                                                                : oracle::cp_prob(phi.phi, c);
    if (qc == 0.0) continue;
    double r = 0.0;
    for (std::size_t row : rows) {
      r += probe::class_log_probs(theta, ds.row(row), Subset::of(c, ds.dim))[ds.labels[row]];
    }
    total += qc * r / static_cast<double>(rows.size());
  }
  return total;
}

double brute_entropy(const SubsetFamilyParams& phi) {
  std::vector<double> probs;
  for (const auto& c : oracle::all_subsets(phi.dim())) {
    probs.push_back(phi.kind == subsets::FamilyKind::poisson ? oracle::poisson_prob(phi.phi, c)
                                                             : oracle::cp_prob(phi.phi, c));
  }
  return oracle::entropy(probs);
}

struct Moments {
  std::vector<double> mean, se, var;
};

template <class Fn>
Moments moments(std::size_t reps, Fn&& draw) {
  std::vector<double> s, s2;
  for (std::size_t r = 0; r < reps; ++r) {
    const auto g = draw();
    if (s.empty()) {
      s.assign(g.size(), 0.0);
      s2.assign(g.size(), 0.0);
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
      s[i] += g[i];
      s2[i] += g[i] * g[i];
    }
  }
  Moments m;
  const double n = static_cast<double>(reps);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double mu = s[i] / n;
    const double var = std::max(0.0, s2[i] / n - mu * mu) * n / (n - 1);
    m.mean.push_back(mu);
    m.var.push_back(var);
    m.se.push_back(std::sqrt(var / n));
  }
  return m;
}

struct Toy {
  io::ReprDataset ds;
  std::vector<std::size_t> rows;
  probe::ProbeParams theta;
};

Toy toy(std::uint64_t seed, std::size_t dim) {
  Rng rng(seed);
  Toy t{gaussian_data(rng, 6, dim, [](const std::vector<double>& h) { return h[0] + h.back() > 0 ? "p" : "n"; }),
        {}, {}};
  t.rows = iota_rows(t.ds.n_rows);
  t.theta = probe::make_probe(Arch::linear, dim, t.ds.inventory, rng);
  for (auto& v : t.theta.theta) v = rng.uniform(-1.5, 1.5);
  return t;
}

}  // namespace

TEST_CASE("elbo estimate on |D|=1 matches the exact bound on average") {
  auto t = toy(1, 1);
  const auto phi = SubsetFamilyParams::poisson({0.4});
  const double exact = brute_expected_loglik(t.theta, phi, t.ds, t.rows) + 0.01 * brute_entropy(phi);
  Rng rng(2);
  const auto m = moments(10000, [&] {
    return std::vector<double>{elbo_estimate(t.theta, phi, t.ds, t.rows, 5, 0.01, rng)};
  });
  CHECK(std::abs(m.mean[0] - exact) <= 3 * m.se[0]);
  CHECK(exact_estimate(t.theta, subsets::VariationalFamily(phi), t.ds, t.rows, 0.01, false).bound ==
        doctest::Approx(exact).epsilon(1e-12));
}

TEST_CASE("full-set mode without entropy is the plain log-likelihood") {
  auto t = toy(3, 4);
  const auto phi = SubsetFamilyParams::full_set(4);
  Rng rng(1);
  double ll = 0.0;
  for (auto r : t.rows) ll += probe::class_log_probs(t.theta, t.ds.row(r), Subset::all(4))[t.ds.labels[r]];
  CHECK(elbo_estimate(t.theta, phi, t.ds, t.rows, 5, 0.0, rng) ==
        doctest::Approx(ll / static_cast<double>(t.rows.size())).epsilon(1e-14));
}

TEST_CASE("perfect classifier gives a zero bound") {
  const auto ds = io::make_dataset(1, {1, -1, 2, -3}, {"pos", "neg", "pos", "neg"}, {"a", "b", "c", "d"});
  auto theta = probe::zero_probe(Arch::linear, 1, ds.inventory);
  theta.theta[0] = -1000;  // neg
  theta.theta[1] = 1000;   // pos
  Rng rng(0);
  CHECK(elbo_estimate(theta, SubsetFamilyParams::full_set(1), ds, iota_rows(4), 5, 0.0, rng) == 0.0);
}

TEST_CASE("zero-weight probe on a balanced batch has zero output-bias gradient") {
  const auto ds = io::make_dataset(2, {1, 2, -1, 0, 3, 3, 0, -2}, {"a", "b", "a", "b"}, {"w", "x", "y", "z"});
  const auto theta = probe::zero_probe(Arch::linear, 2, ds.inventory);
  Rng rng(4);
  const auto g = grad_theta_estimate(theta, SubsetFamilyParams::poisson({0.3, -0.2}), ds, iota_rows(4), 5, rng);
  CHECK(g[4] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(std::abs(g[5]) <= 1e-15);
}

TEST_CASE("theta gradient is unbiased against enumeration") {
  for (auto make : {+[](std::vector<double> p) { return SubsetFamilyParams::poisson(std::move(p)); },
                    +[](std::vector<double> p) { return SubsetFamilyParams::cond_poisson(std::move(p)); }}) {
    auto t = toy(5, 3);
    const auto phi = make({0.5, -0.7, 0.1});
    const auto exact = oracle::finite_diff(
        [&](const std::vector<double>& th) {
          auto p = t.theta;
          p.theta = th;
          return brute_expected_loglik(p, phi, t.ds, t.rows);
        },
        t.theta.theta, 1e-6);
    Rng rng(6);
    const auto m = moments(10000, [&] { return grad_theta_estimate(t.theta, phi, t.ds, t.rows, 1, rng); });
    for (std::size_t i = 0; i < exact.size(); ++i) {
      CAPTURE(i);
      CHECK(std::abs(m.mean[i] - exact[i]) <= 3 * m.se[i] + 1e-8);
    }
  }
}

TEST_CASE("theta gradient variance scales as 1/M") {
  auto t = toy(7, 3);
  const auto phi = SubsetFamilyParams::poisson({0.2, 0.0, -0.4});
  Rng rng(8);
  const auto m1 = moments(4000, [&] { return grad_theta_estimate(t.theta, phi, t.ds, t.rows, 1, rng); });
  const auto m5 = moments(4000, [&] { return grad_theta_estimate(t.theta, phi, t.ds, t.rows, 5, rng); });
  // weight on dimension 0 for class 0
  const double ratio = m1.var[0] / m5.var[0];
  CHECK(ratio >= 4.0);
  CHECK(ratio <= 6.0);
  CHECK(std::abs(m1.mean[0] - m5.mean[0]) <= 3 * std::hypot(m1.se[0], m5.se[0]));
}

TEST_CASE("phi gradient with a constant reward has zero mean") {
  auto t = toy(9, 4);
  const auto theta = probe::zero_probe(Arch::linear, 4, t.ds.inventory);
  const auto phi = SubsetFamilyParams::poisson({0.5, -1.0, 0.0, 1.5});
  Rng rng(10);
  const auto m = moments(5000, [&] { return grad_phi_estimate(theta, phi, t.ds, t.rows, 5, 0.0, rng); });
  for (std::size_t d = 0; d < 4; ++d) CHECK(std::abs(m.mean[d]) <= 3 * m.se[d]);
}

TEST_CASE("phi gradient is unbiased against enumeration") {
  for (auto make : {+[](std::vector<double> p) { return SubsetFamilyParams::poisson(std::move(p)); },
                    +[](std::vector<double> p) { return SubsetFamilyParams::cond_poisson(std::move(p)); }}) {
    auto t = toy(11, 3);
    const std::vector<double> phi0{0.5, -0.7, 0.1};
    const double es = 0.01;
    const auto exact = oracle::finite_diff(
        [&](const std::vector<double>& ph) {
          const auto p = make(ph);
          return brute_expected_loglik(t.theta, p, t.ds, t.rows) + es * brute_entropy(p);
        },
        phi0, 1e-6);
    Rng rng(12);
    const auto phi = make(phi0);
    const auto m = moments(10000, [&] { return grad_phi_estimate(t.theta, phi, t.ds, t.rows, 5, es, rng); });
    const auto ex = exact_estimate(t.theta, subsets::VariationalFamily(phi), t.ds, t.rows, es, true);
    for (std::size_t d = 0; d < 3; ++d) {
      CHECK(std::abs(m.mean[d] - exact[d]) <= 3 * m.se[d] + 1e-8);
      CHECK(ex.grad_phi[d] == doctest::Approx(exact[d]).epsilon(1e-6));
    }
  }
}

TEST_CASE("entropy term alone is the scaled entropy gradient") {
  const auto ds = io::make_dataset(3, {1, 2, 3, 4, 5, 6}, {"a", "a"}, {"x", "y"});
  io::ReprDataset two = ds;
  two.inventory = {"a", "b"};
  auto theta = probe::zero_probe(Arch::linear, 3, two.inventory);
  theta.theta[6] = 1000;  // bias of "a": log p = 0 for any C
  const auto phi = SubsetFamilyParams::cond_poisson({0.3, -1.2, 0.8});
  Rng rng(1);
  const auto g = grad_phi_estimate(theta, phi, two, iota_rows(2), 5, 0.01, rng);
  const auto h = subsets::family_grad_phi_entropy(phi);
  for (std::size_t d = 0; d < 3; ++d) CHECK(g[d] == doctest::Approx(0.01 * h[d]).epsilon(1e-14));
}

TEST_CASE("exact bound stays below the exact log-marginal") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    auto t = toy(100 + trial, 1 + rng.index(6));
    const auto d = t.ds.dim;
    const auto phi = trial % 2 ? SubsetFamilyParams::poisson(oracle::random_vector(rng, d, -2, 2))
                               : SubsetFamilyParams::cond_poisson(oracle::random_vector(rng, d, -2, 2));
    for (double es : {0.0, 0.01, 1.0}) {
      const double b = exact_estimate(t.theta, subsets::VariationalFamily(phi), t.ds, t.rows, es, false).bound;
      CHECK(b <= exact_log_marginal(t.theta, phi, t.ds, t.rows) + 1e-12);
    }
  }
}

TEST_CASE("exact-gradient Adam does not decrease the bound on a small instance") {
  Rng rng(14);
  auto ds = gaussian_data(rng, 40, 4, [](const std::vector<double>& h) { return h[1] - h[2] > 0 ? "u" : "v"; });
  TrainConfig c;
  c.exact = true;
  c.holdout_fraction = 0.0;
  c.l1 = c.l2 = 0.0;
  c.max_epochs = 150;
  c.patience = 1000;
  for (auto fam : {subsets::FamilyKind::poisson, subsets::FamilyKind::cond_poisson}) {
    c.family = fam;
    const auto tp = train_probe(ds, c);
    REQUIRE(tp.log.size() == 150);
    for (std::size_t e = 1; e < tp.log.size(); ++e) {
      CHECK(tp.log[e].bound_train >= tp.log[e - 1].bound_train - 1e-9);
    }
  }
}

TEST_CASE("full-set mode follows plain regularized maximum likelihood") {
  Rng rng(15);
  auto ds = gaussian_data(rng, 30, 3, [](const std::vector<double>& h) { return h[0] > 0 ? "a" : "b"; });
  TrainConfig c;
  c.full_set_mode = true;
  c.max_epochs = 25;
  c.patience = 1000;
  c.holdout_fraction = 0.0;
  c.seed = 4;
  const auto tp = train_probe(ds, c);

  // Reference: same initialization, Adam on -(mean loglik - penalty) with full inputs.
  Rng init(derive_seed(4, 0));
  auto theta = probe::make_probe(Arch::linear, 3, ds.inventory, init, c.hidden);
  Adam adam(theta.theta.size(), c.learning_rate, c.beta1, c.beta2, c.adam_eps);
  const auto rows = iota_rows(30);
  probe::ProbeParams best = theta;
  double best_ll = -1e300;
  for (int e = 0; e < 25; ++e) {
    std::vector<double> g(theta.theta.size(), 0.0), loss(theta.theta.size(), 0.0);
    probe::Workspace ws(theta);
    for (auto r : rows) probe::log_prob_and_grad(theta, ds.row(r), ds.labels[r], ws, g, 1.0 / 30);
    probe::add_elasticnet_grad(theta, c.l1, c.l2, loss);
    for (std::size_t i = 0; i < g.size(); ++i) loss[i] -= g[i];
    adam.step(theta.theta, loss);
    double ll = 0.0;
    for (auto r : rows) ll += probe::log_prob_and_grad(theta, ds.row(r), ds.labels[r], ws, {}) / 30;
    if (ll > best_ll) {
      best_ll = ll;
      best = theta;
    }
  }
  for (std::size_t i = 0; i < best.theta.size(); ++i) {
    CHECK(tp.theta.theta[i] == doctest::Approx(best.theta[i]).epsilon(1e-12));
  }
}

TEST_CASE("full-set mode separates linearly separable data") {
  Rng rng(16);
  auto ds = gaussian_data(rng, 600, 5, [](const std::vector<double>& h) { return h[0] + 0.5 * h[3] > 0 ? "a" : "b"; });
  ds = io::lemma_disjoint_split(ds, {0.8, 0.0, 0.2}, 1);
  TrainConfig c;
  c.full_set_mode = true;
  c.learning_rate = 0.05;
  c.max_epochs = 400;
  const auto tp = train_probe(ds, c);
  std::size_t right = 0;
  const auto test = io::rows_in_split(ds, io::Split::test);
  for (auto r : test) {
    const auto lp = probe::class_log_probs(tp.theta, ds.row(r), Subset::all(5));
    right += static_cast<std::size_t>(std::max_element(lp.begin(), lp.end()) - lp.begin()) == ds.labels[r];
  }
  CHECK(static_cast<double>(right) / static_cast<double>(test.size()) >= 0.99);
}

TEST_CASE("planted dimensions get the highest inclusion probabilities") {
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(1000 + seed);
    auto ds = gaussian_data(rng, 400, 16, [](const std::vector<double>& h) { return h[3] + h[7] > 0 ? "a" : "b"; });
    TrainConfig c;
    c.seed = seed;
    c.learning_rate = 0.05;
    c.batch_size = 100;
    c.max_epochs = 200;
    const auto tp = train_probe(ds, c);
    const auto incl = subsets::VariationalFamily(tp.phi).marginal_inclusion();
    std::vector<std::size_t> order(16);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return incl[a] > incl[b]; });
    const std::vector<std::size_t> top(order.begin(), order.begin() + 4);
    hits += std::count(top.begin(), top.end(), 3) && std::count(top.begin(), top.end(), 7);
  }
  CHECK(hits >= 9);
}

TEST_CASE("constant-label training stops on patience") {
  Rng rng(17);
  auto ds = gaussian_data(rng, 50, 3, [](const std::vector<double>&) { return "same"; });
  std::vector<std::string> labels(50, "same");
  labels[49] = "other";
  std::vector<io::Split> splits(50, io::Split::train);
  splits[49] = io::Split::test;
  ds = io::make_dataset(3, ds.matrix, labels, ds.lemmas, splits);
  TrainConfig c;
  c.learning_rate = 0.1;
  const auto tp = train_probe(ds, c);
  CHECK(tp.stop_reason == "patience");
  CHECK(tp.log.size() < c.max_epochs);
}

TEST_CASE("training is deterministic for a fixed seed") {
  Rng rng(18);
  auto ds = gaussian_data(rng, 80, 6, [](const std::vector<double>& h) { return h[2] > 0.3 ? "a" : "b"; });
  TrainConfig c;
  c.family = subsets::FamilyKind::cond_poisson;
  c.arch = Arch::mlp1;
  c.hidden = 8;
  c.max_epochs = 30;
  c.seed = 77;
  const auto a = train_probe(ds, c);
  const auto b = train_probe(ds, c);
  CHECK(format_training_log(a) == format_training_log(b));
  CHECK(a.theta.theta == b.theta.theta);
  CHECK(a.phi.phi == b.phi.phi);
  c.seed = 78;
  CHECK(train_probe(ds, c).theta.theta != a.theta.theta);
}

TEST_CASE("training errors") {
  Rng rng(19);
  auto ds = gaussian_data(rng, 20, 2, [](const std::vector<double>& h) { return h[0] > 0 ? "a" : "b"; });
  TrainConfig c;
  c.learning_rate = 1e300;
  c.max_epochs = 5;
  CHECK(error_kind_of([&] { train_probe(ds, c); }) == ErrorKind::numeric);
  c = TrainConfig{};
  c.mc_samples = 0;
  CHECK(error_kind_of([&] { train_probe(ds, c); }) == ErrorKind::domain);
  std::vector<std::size_t> none;
  CHECK(error_kind_of([&] { train_probe(ds, none, TrainConfig{}); }) == ErrorKind::empty);
}
