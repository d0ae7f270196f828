#include <cmath>
#include <memory>

#include "command.hpp"
#include "latprobe/error.hpp"
#include "latprobe/io/dataset.hpp"
#include "latprobe/probe/checkpoint.hpp"
#include "latprobe/probe/gaussian.hpp"
#include "latprobe/select/greedy.hpp"
#include "latprobe/train/train.hpp"
#include "latprobe/util/tsv.hpp"

namespace latprobe::cli {

namespace {

using util::format_double;

struct DataOptions {
  std::string matrix, labels;
  std::vector<double> split;  // empty: use the split column of the labels file
  std::size_t min_label_count = 0;
  std::uint64_t seed = 0;
};

void bind_data(Command& c, DataOptions& o) {
  c.required("matrix", o.matrix, "FPRB representation matrix");
  c.required("labels", o.labels, "labels TSV (row, label, lemma[, split])");
  c.key("split", o.split, "train,dev,test ratios for a lemma-disjoint split; empty keeps the file's split column");
  c.key("min_label_count", o.min_label_count, "drop rows whose label occurs fewer times (0 keeps all)");
  c.key("seed", o.seed, "master seed");
}

io::ReprDataset load_data(const DataOptions& o) {
  io::ReprDataset ds = io::load_representations(o.matrix, o.labels);
  if (o.min_label_count > 0) ds = io::filter_rare_values(ds, o.min_label_count);
  if (!o.split.empty()) {
    require(o.split.size() == 3, ErrorKind::domain, "split needs three ratios");
    ds = io::lemma_disjoint_split(ds, {o.split[0], o.split[1], o.split[2]}, o.seed);
  }
  return ds;
}

std::vector<std::size_t> split_rows(const io::ReprDataset& ds, const std::string& name) {
  const auto s = io::parse_split(name);
  require(s.has_value(), ErrorKind::domain, "unknown split '" + name + "'");
  require(ds.has_splits(), ErrorKind::schema, "dataset has no split tags; pass --split or tag the labels file");
  auto rows = io::rows_in_split(ds, *s);
  require(!rows.empty(), ErrorKind::empty, "split '" + name + "' has no rows");
  return rows;
}

struct TrainOptions {
  train::TrainConfig cfg;
  std::string arch = "linear";
  std::string family = "poisson";
};

void bind_train(Command& c, TrainOptions& o) {
  auto& t = o.cfg;
  c.key("arch", o.arch, "probe architecture: linear, mlp1, mlp2");
  c.key("hidden", t.hidden, "hidden width for MLP probes");
  c.key("family", o.family, "subset family: poisson, cond_poisson, full_set");
  c.key("mc_samples", t.mc_samples, "Monte Carlo subsets per row");
  c.key("max_epochs", t.max_epochs, "epoch limit");
  c.key("patience", t.patience, "early-stopping patience in epochs");
  c.key("min_delta", t.min_delta, "holdout gain that resets patience");
  c.key("learning_rate", t.learning_rate, "Adam learning rate");
  c.key("beta1", t.beta1, "Adam beta1");
  c.key("beta2", t.beta2, "Adam beta2");
  c.key("adam_eps", t.adam_eps, "Adam epsilon");
  c.key("l1", t.l1, "L1 weight on probe weights");
  c.key("l2", t.l2, "L2 weight on probe weights");
  c.key("entropy_scale", t.entropy_scale, "weight of the family entropy term");
  c.key("batch_size", t.batch_size, "rows per step (0 = full batch)");
  c.key("holdout_fraction", t.holdout_fraction, "row fraction held out for early stopping");
  c.key("exact", t.exact, "enumerate subsets instead of sampling (|D| <= 12)");
}

train::TrainConfig finish_train(const TrainOptions& o, std::uint64_t seed) {
  train::TrainConfig cfg = o.cfg;
  cfg.arch = probe::parse_arch(o.arch);
  cfg.family = subsets::parse_family(o.family);
  cfg.seed = seed;
  cfg.validate();
  return cfg;
}

std::string metrics_line(const std::string& model, std::size_t size, const select::Metrics& m) {
  return model + '\t' + std::to_string(size) + '\t' + format_double(m.mean_loglik) + '\t' +
         format_double(m.mi_nats) + '\t' + format_double(m.mi_bits) + '\t' +
         (std::isnan(m.nmi) ? std::string("nan") : format_double(m.nmi)) + '\t' + format_double(m.accuracy) + '\n';
}

class Validate : public Command {
 public:
  explicit Validate(CLI::App& app) : Command(app, "validate", "Load and validate a representation dataset") {
    bind_data(*this, data_);
    inputs({"matrix", "labels"});
    action = [this] {
      const auto ds = load_data(data_);
      std::string s = "n_rows\tdim\tn_classes\ttrain\tdev\ttest\n";
      auto count = [&](io::Split sp) {
        return ds.has_splits() ? std::to_string(io::rows_in_split(ds, sp).size()) : std::string("0");
      };
      s += std::to_string(ds.n_rows) + '\t' + std::to_string(ds.dim) + '\t' + std::to_string(ds.inventory.size()) +
           '\t' + count(io::Split::train) + '\t' + count(io::Split::dev) + '\t' + count(io::Split::test) + '\n';
      write("validation.tsv", s);
    };
  }

 private:
  DataOptions data_;
};

class TrainProbe : public Command {
 public:
  explicit TrainProbe(CLI::App& app) : Command(app, "train-probe", "Jointly train a probe and its subset family") {
    bind_data(*this, data_);
    bind_train(*this, train_);
    inputs({"matrix", "labels"});
    action = [this] {
      const auto ds = load_data(data_);
      const auto cfg = finish_train(train_, data_.seed);
      const auto tp = train::train_probe(ds, cfg);
      probe::Checkpoint ck{tp.theta, tp.phi, cfg.seed, config_hash()};
      write("probe.ckpt", probe::encode_checkpoint(ck));
      write("training_log.tsv", train::format_training_log(tp));
      write("train_summary.tsv", "best_epoch\tepochs\tstop_reason\n" + std::to_string(tp.best_epoch) + '\t' +
                                     std::to_string(tp.log.size()) + '\t' + tp.stop_reason + '\n');
    };
  }

 private:
  DataOptions data_;
  TrainOptions train_;
};

class Select : public Command {
 public:
  explicit Select(CLI::App& app) : Command(app, "select", "Greedy dimension selection on dev, metrics on test") {
    bind_data(*this, data_);
    key("checkpoint", checkpoint_, "probe checkpoint (scorer = probe)");
    key("scorer", scorer_, "probe or gaussian");
    key("shrinkage", shrinkage_, "covariance shrinkage for the gaussian scorer");
    key("k_max", k_max_, "number of greedy steps");
    key("jobs", jobs_, "threads for candidate evaluation");
    inputs({"matrix", "labels", "checkpoint"});
    action = [this] {
      const auto ds = load_data(data_);
      const auto dev = split_rows(ds, "dev");
      const auto test = split_rows(ds, "test");
      std::unique_ptr<probe::GaussianProbe> model;
      select::Scorer scorer;
      if (scorer_ == "probe") {
        require(!checkpoint_.empty(), ErrorKind::schema, "scorer 'probe' needs --checkpoint");
        const auto ck = probe::load_checkpoint(checkpoint_);
        require(ck.theta.classes == ds.inventory, ErrorKind::schema, "checkpoint classes do not match the labels");
        scorer = select::probe_scorer(ck.theta);
      } else if (scorer_ == "gaussian") {
        model = std::make_unique<probe::GaussianProbe>(probe::gaussian_probe_fit(ds, split_rows(ds, "train"), shrinkage_));
        scorer = select::gaussian_scorer(*model);
      } else {
        fail(ErrorKind::domain, "unknown scorer '" + scorer_ + "'");
      }
      const std::size_t k = k_max_ == 0 ? ds.dim : k_max_;
      const auto r = select::greedy_select(scorer, ds, dev, test, k, jobs_);
      write("selection.tsv", select::format_selection(r));
    };
  }

 private:
  DataOptions data_;
  std::string checkpoint_;
  std::string scorer_ = "probe";
  double shrinkage_ = 0.1;
  std::size_t k_max_ = 0;
  std::size_t jobs_ = 1;
};

class Evaluate : public Command {
 public:
  explicit Evaluate(CLI::App& app) : Command(app, "evaluate", "Metrics of a trained probe on a dimension subset") {
    bind_data(*this, data_);
    required("checkpoint", checkpoint_, "probe checkpoint");
    key("dims", dims_, "dimension subset (empty = all dimensions)");
    key("eval_split", eval_split_, "split to evaluate on");
    key("upper_bound", upper_bound_, "also train a fresh probe on inputs restricted to the subset");
    bind_train(*this, train_);
    inputs({"matrix", "labels", "checkpoint"});
    action = [this] {
      const auto ds = load_data(data_);
      const auto rows = split_rows(ds, eval_split_);
      const auto ck = probe::load_checkpoint(checkpoint_);
      require(ck.theta.classes == ds.inventory, ErrorKind::schema, "checkpoint classes do not match the labels");
      const auto c = dims_.empty() ? subsets::Subset::all(ds.dim) : subsets::Subset::of(dims_, ds.dim);
      std::string s = "model\tsize\tmean_loglik\tmi_nats\tmi_bits\tnmi\taccuracy\n";
      s += metrics_line("shared", c.size(), select::evaluate(select::probe_scorer(ck.theta), c, ds, rows));
      if (upper_bound_) {
        const auto cfg = finish_train(train_, data_.seed);
        const auto ub = select::retrained_upper_bound(ds, c, cfg, split_rows(ds, "train"), rows);
        s += metrics_line("retrained", c.size(), ub.metrics);
      }
      write("metrics.tsv", s);
    };
  }

 private:
  DataOptions data_;
  TrainOptions train_;
  std::string checkpoint_;
  std::vector<std::size_t> dims_;
  std::string eval_split_ = "test";
  bool upper_bound_ = false;
};

}  // namespace

std::vector<std::unique_ptr<Command>> register_probe_commands(CLI::App& app) {
  std::vector<std::unique_ptr<Command>> v;
  v.push_back(std::make_unique<Validate>(app));
  v.push_back(std::make_unique<TrainProbe>(app));
  v.push_back(std::make_unique<Select>(app));
  v.push_back(std::make_unique<Evaluate>(app));
  return v;
}

}  // namespace latprobe::cli
