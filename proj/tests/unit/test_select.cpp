#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

#include "latprobe/error.hpp"
#include "latprobe/select/greedy.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace latprobe;
using namespace latprobe::select;
using probe::Arch;
using subsets::Subset;
using testutil::error_kind_of;

namespace {

std::vector<std::size_t> iota_rows(std::size_t n) {
  std::vector<std::size_t> r(n);
  std::iota(r.begin(), r.end(), 0);
  return r;
}

io::ReprDataset random_ds(Rng& rng, std::size_t n, std::size_t dim,
                          const std::function<std::string(const std::vector<double>&, Rng&)>& label) {
  std::vector<double> m;
  std::vector<std::string> labels, lemmas;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> h(dim);
    for (auto& v : h) v = rng.normal();
    m.insert(m.end(), h.begin(), h.end());
    labels.push_back(label(h, rng));
    lemmas.push_back("w" + std::to_string(i));
  }
  return io::make_dataset(dim, std::move(m), labels, std::move(lemmas));
}

double direct_dev_ll(const probe::ProbeParams& p, const io::ReprDataset& ds,
                     const std::vector<std::size_t>& rows, const std::vector<std::size_t>& c) {
  double s = 0.0;
  for (auto r : rows) s += probe::class_log_probs(p, ds.row(r), Subset::of(c, ds.dim))[ds.labels[r]];
  return s / static_cast<double>(rows.size());
}

// Balanced binary set where dim 0 is +-1 by label.
io::ReprDataset balanced_binary() {
  return io::make_dataset(1, {1, -1, 1, -1}, {"a", "b", "a", "b"}, {"p", "q", "r", "s"});
}

}  // namespace

TEST_CASE("greedy picks the only dimensions the probe uses") {
  Rng rng(1);
  auto ds = random_ds(rng, 60, 8, [](const std::vector<double>& h, Rng&) { return h[2] - h[5] > 0 ? "x" : "y"; });
  auto p = probe::zero_probe(Arch::linear, 8, ds.inventory);
  p.theta[2] = 1.5;
  p.theta[5] = -2.0;
  p.theta[8 + 2] = -1.5;
  p.theta[8 + 5] = 2.0;
  const auto rows = iota_rows(60);
  const auto r = greedy_select(probe_scorer(p), ds, rows, rows, 2);
  CHECK(std::set<std::size_t>(r.dims.begin(), r.dims.end()) == std::set<std::size_t>{2, 5});

  // exhaustive check of step 1 and 2
  std::size_t best1 = 0;
  for (std::size_t d = 1; d < 8; ++d) {
    if (direct_dev_ll(p, ds, rows, {d}) > direct_dev_ll(p, ds, rows, {best1})) best1 = d;
  }
  CHECK(r.dims[0] == best1);
  std::size_t best2 = best1 == 0 ? 1 : 0;
  for (std::size_t d = 0; d < 8; ++d) {
    if (d == best1) continue;
    std::vector<std::size_t> c{best1, d}, cb{best1, best2};
    std::sort(c.begin(), c.end());
    std::sort(cb.begin(), cb.end());
    if (direct_dev_ll(p, ds, rows, c) > direct_dev_ll(p, ds, rows, cb)) best2 = d;
  }
  CHECK(r.dims[1] == best2);
}

TEST_CASE("greedy selection shapes and tie-breaking") {
  Rng rng(2);
  auto ds = random_ds(rng, 20, 5, [](const std::vector<double>& h, Rng&) { return h[0] > 0 ? "x" : "y"; });
  const auto rows = iota_rows(20);
  const auto zero = probe::zero_probe(Arch::linear, 5, ds.inventory);
  CHECK(greedy_select(probe_scorer(zero), ds, rows, rows, 5).dims == std::vector<std::size_t>{0, 1, 2, 3, 4});

  auto p = probe::make_probe(Arch::mlp1, 5, ds.inventory, rng, 6);
  for (auto& v : p.theta) v = rng.uniform(-1, 1);
  const auto full = greedy_select(probe_scorer(p), ds, rows, rows, 5);
  auto sorted = full.dims;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<std::size_t>{0, 1, 2, 3, 4});
  CHECK(full.test.size() == 5);
  CHECK(error_kind_of([&] { greedy_select(probe_scorer(p), ds, rows, rows, 6); }) == ErrorKind::domain);
}

TEST_CASE("greedy steps are optimal and independent of the thread count") {
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    auto ds = random_ds(rng, 40, 6, [](const std::vector<double>& h, Rng& r) {
      return h[1] + 0.5 * h[4] + 0.3 * r.normal() > 0 ? "x" : "y";
    });
    auto p = probe::make_probe(Arch::linear, 6, ds.inventory, rng);
    for (auto& v : p.theta) v = rng.uniform(-2, 2);
    const auto dev = iota_rows(40);
    const auto r1 = greedy_select(probe_scorer(p), ds, dev, dev, 6, 1);
    const auto r4 = greedy_select(probe_scorer(p), ds, dev, dev, 6, 4);
    CHECK(r1.dims == r4.dims);
    CHECK(r1.dev_loglik == r4.dev_loglik);
    std::vector<std::size_t> prefix;
    for (std::size_t t = 0; t < r1.dims.size(); ++t) {
      for (std::size_t d = 0; d < 6; ++d) {
        if (std::find(prefix.begin(), prefix.end(), d) != prefix.end()) continue;
        auto c = prefix;
        c.push_back(d);
        std::sort(c.begin(), c.end());
        CHECK(direct_dev_ll(p, ds, dev, c) <= r1.dev_loglik[t] + 1e-12);
      }
      prefix.push_back(r1.dims[t]);
      const auto& m = r1.test[t];
      CHECK(m.nmi <= 1.0);
      CHECK(m.mi_bits == m.mi_nats / std::numbers::ln2);
    }
  }
}

TEST_CASE("mutual information bound examples") {
  const auto ds = balanced_binary();
  const auto rows = iota_rows(4);
  auto perfect = probe::zero_probe(Arch::linear, 1, ds.inventory);
  perfect.theta[0] = 1000;
  perfect.theta[1] = -1000;
  const auto mi = mi_lower_bound(perfect, Subset::all(1), ds, rows);
  CHECK(mi.nats == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(mi.bits == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(nmi(perfect, Subset::all(1), ds, rows) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(accuracy(perfect, Subset::all(1), ds, rows) == 1.0);

  const auto uniform = probe::zero_probe(Arch::linear, 1, ds.inventory);
  CHECK(std::abs(mi_lower_bound(uniform, Subset::all(1), ds, rows).nats) <= 1e-15);
  CHECK(std::abs(nmi(uniform, Subset::all(1), ds, rows)) <= 1e-15);
  // argmax ties go to the first class: constant prediction on balanced labels
  CHECK(accuracy(uniform, Subset::all(1), ds, rows) == 0.5);

  const std::vector<std::size_t> only_a{0, 2};
  const auto m = mi_lower_bound(uniform, Subset::all(1), ds, only_a);
  CHECK(m.nats == doctest::Approx(-std::log(2.0)).epsilon(1e-15));
  CHECK(error_kind_of([&] { nmi(uniform, Subset::all(1), ds, only_a); }) == ErrorKind::undefined);
}

TEST_CASE("hand-labeled accuracy") {
  const auto ds = io::make_dataset(1, {2, 1, -1, -3}, {"a", "b", "b", "b"}, {"p", "q", "r", "s"});
  auto p = probe::zero_probe(Arch::linear, 1, ds.inventory);
  p.theta[0] = 1;
  p.theta[1] = -1;
  // predictions a, a, b, b against labels a, b, b, b
  CHECK(accuracy(p, Subset::all(1), ds, iota_rows(4)) == 0.75);
}

TEST_CASE("gaussian scorer drives the same selection code") {
  Rng rng(4);
  auto ds = random_ds(rng, 300, 6, [](const std::vector<double>& h, Rng&) { return h[4] > 0 ? "x" : "y"; });
  const auto rows = iota_rows(300);
  const auto model = probe::gaussian_probe_fit(ds, rows);
  const auto r = greedy_select(gaussian_scorer(model), ds, rows, rows, 2);
  CHECK(r.dims[0] == 4);
  CHECK(r.test[0].accuracy > 0.8);
}

TEST_CASE("retrained upper bound") {
  Rng rng(5);
  auto ds = random_ds(rng, 400, 6, [](const std::vector<double>& h, Rng& r) {
    return h[0] + h[1] + 0.1 * r.normal() > 0 ? "x" : "y";
  });
  ds = io::lemma_disjoint_split(ds, {0.7, 0.0, 0.3}, 2);
  const auto train_rows = io::rows_in_split(ds, io::Split::train);
  const auto test_rows = io::rows_in_split(ds, io::Split::test);
  train::TrainConfig c;
  c.learning_rate = 0.05;
  c.max_epochs = 300;

  SUBCASE("planted dims") {
    const auto ub = retrained_upper_bound(ds, Subset::of({0, 1}, 6), c, train_rows, test_rows);
    CHECK(ub.metrics.accuracy >= 0.95);
  }
  SUBCASE("noise dims") {
    const auto ub = retrained_upper_bound(ds, Subset::of({3, 4, 5}, 6), c, train_rows, test_rows);
    CHECK(ub.metrics.nmi <= 0.05);
  }
  SUBCASE("full set equals plain training") {
    const auto ub = retrained_upper_bound(ds, Subset::all(6), c, train_rows, test_rows);
    train::TrainConfig fc = c;
    fc.full_set_mode = true;
    const auto plain = train::train_probe(ds, train_rows, fc);
    CHECK(ub.probe.theta.theta == plain.theta.theta);
  }
}

TEST_CASE("retrained probe is at least as good as the shared probe on convex instances") {
  Rng rng(6);
  auto ds = random_ds(rng, 150, 4, [](const std::vector<double>& h, Rng& r) {
    return h[0] - h[2] + r.normal() > 0 ? "x" : "y";
  });
  const auto rows = iota_rows(150);
  train::TrainConfig c;
  c.learning_rate = 0.02;
  c.l1 = c.l2 = 0.0;
  c.holdout_fraction = 0.0;
  c.max_epochs = 4000;
  c.min_delta = 0.0;
  c.patience = 200;
  const auto shared = train::train_probe(ds, rows, c);
  c.exact = true;  // deterministic full-batch gradients for the retrained probe
  for (const auto& idx : std::vector<std::vector<std::size_t>>{{0}, {0, 2}, {1, 3}, {0, 1, 2, 3}}) {
    const Subset s = Subset::of(idx, 4);
    const double shared_ll = evaluate(probe_scorer(shared.theta), s, ds, rows).mean_loglik;
    const auto ub = retrained_upper_bound(ds, s, c, rows, rows);
    CHECK(ub.metrics.mean_loglik >= shared_ll - 1e-6);
  }
}

TEST_CASE("selection TSV") {
  SelectionReport r;
  r.dims = {3};
  Metrics m;
  m.mi_bits = 0.5;
  m.nmi = 0.25;
  m.accuracy = 0.75;
  r.test = {m};
  r.dev_loglik = {-0.1};
  CHECK(format_selection(r) == "step\tdim\tmi_bits\tnmi\taccuracy\n1\t3\t0.5\t0.25\t0.75\n");
}
