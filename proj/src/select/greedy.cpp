#include "latprobe/select/greedy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "latprobe/error.hpp"
#include "latprobe/parallel.hpp"
#include "latprobe/simd/kernels.hpp"
#include "latprobe/util/tsv.hpp"

namespace latprobe::select {

using subsets::Subset;

Scorer probe_scorer(const probe::ProbeParams& theta) {
  return [theta](const Subset& c, const io::ReprDataset& ds, std::span<const std::size_t> rows,
                 std::vector<double>& out) {
    require(theta.in_dim == ds.dim, ErrorKind::shape, "probe and dataset dimensions differ");
    const std::size_t nc = theta.n_classes();
    out.resize(rows.size() * nc);
    probe::Workspace ws(theta);
    const std::vector<double> m = c.mask(ds.dim);
    std::vector<double> x(ds.dim);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      simd::mul(ds.row(rows[i]), m, x);
      probe::forward(theta, x, ws);
      std::copy(ws.log_probs.begin(), ws.log_probs.end(), out.begin() + static_cast<std::ptrdiff_t>(i * nc));
    }
  };
}

Scorer gaussian_scorer(const probe::GaussianProbe& model) {
  return [&model](const Subset& c, const io::ReprDataset& ds, std::span<const std::size_t> rows,
                  std::vector<double>& out) {
    require(model.dim == ds.dim, ErrorKind::shape, "model and dataset dimensions differ");
    const std::size_t nc = model.classes.size();
    const probe::GaussianView view(model, c);
    out.resize(rows.size() * nc);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto lp = view.log_probs(ds.row(rows[i]));
      std::copy(lp.begin(), lp.end(), out.begin() + static_cast<std::ptrdiff_t>(i * nc));
    }
  };
}

double label_entropy(const io::ReprDataset& ds, std::span<const std::size_t> rows) {
  require(!rows.empty(), ErrorKind::empty, "evaluation set is empty");
  std::vector<std::size_t> count(ds.inventory.size(), 0);
  for (std::size_t r : rows) ++count[ds.labels[r]];
  double h = 0.0;
  const double n = static_cast<double>(rows.size());
  for (std::size_t c : count) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

namespace {

Metrics metrics_from(const std::vector<double>& lp, std::size_t nc, const io::ReprDataset& ds,
                     std::span<const std::size_t> rows) {
  Metrics m;
  double ll = 0.0;
  std::size_t right = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double* row = lp.data() + i * nc;
    const std::size_t y = ds.labels[rows[i]];
    ll += row[y];
    right += static_cast<std::size_t>(std::max_element(row, row + nc) - row) == y;
  }
  const double n = static_cast<double>(rows.size());
  m.mean_loglik = ll / n;
  m.label_entropy = label_entropy(ds, rows);
  m.mi_nats = m.label_entropy + m.mean_loglik;
  m.mi_bits = m.mi_nats / std::numbers::ln2;
  m.nmi = m.label_entropy > 0.0 ? m.mi_nats / m.label_entropy
                                : std::numeric_limits<double>::quiet_NaN();
  m.accuracy = static_cast<double>(right) / n;
  return m;
}

double mean_loglik(const std::vector<double>& lp, std::size_t nc, const io::ReprDataset& ds,
                   std::span<const std::size_t> rows) {
  double ll = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) ll += lp[i * nc + ds.labels[rows[i]]];
  return ll / static_cast<double>(rows.size());
}

}  // namespace

Metrics evaluate(const Scorer& scorer, const Subset& c, const io::ReprDataset& ds,
                 std::span<const std::size_t> rows) {
  require(!rows.empty(), ErrorKind::empty, "evaluation set is empty");
  std::vector<double> lp;
  scorer(c, ds, rows, lp);
  return metrics_from(lp, ds.inventory.size(), ds, rows);
}

MiBound mi_lower_bound(const probe::ProbeParams& theta, const Subset& c, const io::ReprDataset& ds,
                       std::span<const std::size_t> rows) {
  const Metrics m = evaluate(probe_scorer(theta), c, ds, rows);
  return {m.mi_nats, m.mi_bits};
}

double nmi(const probe::ProbeParams& theta, const Subset& c, const io::ReprDataset& ds,
           std::span<const std::size_t> rows) {
  const Metrics m = evaluate(probe_scorer(theta), c, ds, rows);
  require(m.label_entropy > 0.0, ErrorKind::undefined,
          "NMI is undefined: the evaluation labels have zero entropy");
  return m.nmi;
}

double accuracy(const probe::ProbeParams& theta, const Subset& c, const io::ReprDataset& ds,
                std::span<const std::size_t> rows) {
  return evaluate(probe_scorer(theta), c, ds, rows).accuracy;
}

SelectionReport greedy_select(const Scorer& scorer, const io::ReprDataset& ds,
                              std::span<const std::size_t> dev_rows,
                              std::span<const std::size_t> test_rows, std::size_t k_max,
                              std::size_t jobs) {
  require(k_max <= ds.dim, ErrorKind::domain,
          "k_max=" + std::to_string(k_max) + " exceeds |D|=" + std::to_string(ds.dim));
  require(!dev_rows.empty(), ErrorKind::empty, "dev set is empty");
  require(!test_rows.empty(), ErrorKind::empty, "test set is empty");
  const std::size_t nc = ds.inventory.size();

  SelectionReport report;
  std::vector<bool> taken(ds.dim, false);
  for (std::size_t step = 0; step < k_max; ++step) {
    std::vector<std::size_t> cand;
    for (std::size_t d = 0; d < ds.dim; ++d) {
      if (!taken[d]) cand.push_back(d);
    }
    std::vector<double> score(cand.size());
    parallel_for(cand.size(), jobs, [&](std::size_t i) {
      std::vector<std::size_t> idx = report.dims;
      idx.push_back(cand[i]);
      std::vector<double> lp;
      scorer(Subset::of(std::move(idx), ds.dim), ds, dev_rows, lp);
      score[i] = mean_loglik(lp, nc, ds, dev_rows);
    });
    std::size_t best = 0;
    for (std::size_t i = 1; i < cand.size(); ++i) {
      if (score[i] > score[best]) best = i;
    }
    require(std::isfinite(score[best]), ErrorKind::numeric, "non-finite dev log-likelihood");
    report.dims.push_back(cand[best]);
    taken[cand[best]] = true;
    report.dev_loglik.push_back(score[best]);
    report.test.push_back(evaluate(scorer, Subset::of(report.dims, ds.dim), ds, test_rows));
  }
  return report;
}

std::string format_selection(const SelectionReport& r) {
  std::string out = "step\tdim\tmi_bits\tnmi\taccuracy\n";
  for (std::size_t t = 0; t < r.dims.size(); ++t) {
    out += std::to_string(t + 1) + '\t' + std::to_string(r.dims[t]) + '\t' +
           util::format_double(r.test[t].mi_bits) + '\t' +
           (std::isnan(r.test[t].nmi) ? std::string("nan") : util::format_double(r.test[t].nmi)) +
           '\t' + util::format_double(r.test[t].accuracy) + '\n';
  }
  return out;
}

io::ReprDataset masked_dataset(const io::ReprDataset& ds, const Subset& c) {
  io::ReprDataset out = ds;
  const std::vector<double> m = c.mask(ds.dim);
  for (std::size_t i = 0; i < ds.n_rows; ++i) {
    std::span<double> row(out.matrix.data() + i * ds.dim, ds.dim);
    simd::mul(row, m, row);
  }
  return out;
}

UpperBound retrained_upper_bound(const io::ReprDataset& ds, const Subset& c,
                                 const train::TrainConfig& config,
                                 std::span<const std::size_t> train_rows,
                                 std::span<const std::size_t> eval_rows) {
  train::TrainConfig cfg = config;
  cfg.full_set_mode = true;
  const io::ReprDataset masked = masked_dataset(ds, c);
  UpperBound ub;
  ub.probe = train::train_probe(masked, train_rows, cfg);
  ub.metrics = evaluate(probe_scorer(ub.probe.theta), Subset::all(ds.dim), masked, eval_rows);
  return ub;
}

}  // namespace latprobe::select
