#include "latprobe/io/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <numeric>
#include <set>

#include "latprobe/error.hpp"
#include "latprobe/rng.hpp"
#include "latprobe/util/files.hpp"
#include "latprobe/util/tsv.hpp"

namespace latprobe::io {

std::string_view to_string(Split s) noexcept {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "?";
}

std::optional<Split> parse_split(std::string_view s) noexcept {
  if (s == "train") return Split::train;
  if (s == "dev") return Split::dev;
  if (s == "test") return Split::test;
  return std::nullopt;
}

void ReprDataset::validate() const {
  require(n_rows >= 1, ErrorKind::empty, "dataset has no rows");
  require(dim >= 1, ErrorKind::shape, "dataset has zero dimensions");
  require(matrix.size() == n_rows * dim, ErrorKind::shape, "matrix size does not match N*d");
  require(labels.size() == n_rows && lemmas.size() == n_rows, ErrorKind::shape,
          "per-row metadata does not match N");
  require(splits.empty() || splits.size() == n_rows, ErrorKind::shape,
          "split tags do not match N");
  require(std::is_sorted(inventory.begin(), inventory.end()) &&
              std::adjacent_find(inventory.begin(), inventory.end()) == inventory.end(),
          ErrorKind::schema, "label inventory must be sorted and unique");
  for (std::size_t i = 0; i < n_rows; ++i) {
    require(labels[i] < inventory.size(), ErrorKind::schema,
            "row " + std::to_string(i) + ": label outside inventory");
    require(!lemmas[i].empty(), ErrorKind::schema, "row " + std::to_string(i) + ": empty lemma");
  }
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    require(std::isfinite(matrix[i]), ErrorKind::data,
            "non-finite value at row " + std::to_string(i / dim) + ", column " +
                std::to_string(i % dim));
  }
}

ReprDataset make_dataset(std::size_t dim, std::vector<double> matrix,
                         const std::vector<std::string>& labels, std::vector<std::string> lemmas,
                         std::vector<Split> splits) {
  ReprDataset ds;
  ds.dim = dim;
  ds.n_rows = labels.size();
  ds.matrix = std::move(matrix);
  ds.lemmas = std::move(lemmas);
  ds.splits = std::move(splits);
  std::set<std::string> inv(labels.begin(), labels.end());
  ds.inventory.assign(inv.begin(), inv.end());
  ds.labels.reserve(labels.size());
  for (const auto& l : labels) {
    ds.labels.push_back(static_cast<std::size_t>(
        std::lower_bound(ds.inventory.begin(), ds.inventory.end(), l) - ds.inventory.begin()));
  }
  ds.validate();
  return ds;
}

namespace {

constexpr char kMagic[4] = {'F', 'P', 'R', 'B'};
constexpr std::size_t kHeaderBytes = 24;

template <class T>
T read_le(const unsigned char* p) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(p[i]) << (8 * i);
  return v;
}

template <class T>
void write_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace

FprbMatrix decode_fprb(std::string_view bytes) {
  require(bytes.size() >= kHeaderBytes, ErrorKind::format, "FPRB: truncated header");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  require(std::memcmp(p, kMagic, 4) == 0, ErrorKind::format, "FPRB: bad magic");
  const auto version = read_le<std::uint32_t>(p + 4);
  require(version == 1, ErrorKind::format, "FPRB: unsupported version " + std::to_string(version));
  FprbMatrix m;
  m.rows = read_le<std::uint64_t>(p + 8);
  m.cols = read_le<std::uint32_t>(p + 16);
  const auto reserved = read_le<std::uint32_t>(p + 20);
  require(reserved == 0, ErrorKind::format, "FPRB: reserved field must be 0");
  const std::uint64_t count = m.rows * m.cols;
  require(m.cols == 0 || count / m.cols == m.rows, ErrorKind::shape, "FPRB: N*d overflows");
  require(bytes.size() - kHeaderBytes == count * 4, ErrorKind::shape,
          "FPRB: payload holds " + std::to_string((bytes.size() - kHeaderBytes) / 4) +
              " floats, header declares " + std::to_string(count));
  m.values.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint32_t bits = read_le<std::uint32_t>(p + kHeaderBytes + 4 * i);
    std::memcpy(&m.values[i], &bits, 4);
  }
  return m;
}

std::string encode_fprb(const FprbMatrix& m) {
  std::string out;
  out.reserve(kHeaderBytes + 4 * m.values.size());
  out.append(kMagic, 4);
  write_le<std::uint32_t>(out, 1);
  write_le<std::uint64_t>(out, m.rows);
  write_le<std::uint32_t>(out, m.cols);
  write_le<std::uint32_t>(out, 0);
  for (float f : m.values) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    write_le<std::uint32_t>(out, bits);
  }
  return out;
}

ReprDataset load_representations(const std::filesystem::path& matrix_path,
                                 const std::filesystem::path& labels_path) {
  const FprbMatrix m = decode_fprb(util::read_file(matrix_path));
  require(m.rows >= 1 && m.cols >= 1, ErrorKind::shape, "FPRB: N and d must be positive");
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    require(std::isfinite(m.values[i]), ErrorKind::data,
            "non-finite value at row " + std::to_string(i / m.cols) + ", column " +
                std::to_string(i % m.cols));
  }

  const auto tsv = util::read_tsv(labels_path);
  const bool with_split = tsv.header.size() == 4;
  if (with_split) {
    util::expect_header(tsv, {"row", "label", "lemma", "split"}, labels_path);
  } else {
    util::expect_header(tsv, {"row", "label", "lemma"}, labels_path);
  }
  require(tsv.rows.size() == m.rows, ErrorKind::shape,
          labels_path.string() + ": " + std::to_string(tsv.rows.size()) +
              " label rows for a matrix with N=" + std::to_string(m.rows));

  std::vector<std::string> labels, lemmas;
  std::vector<Split> splits;
  labels.reserve(m.rows);
  lemmas.reserve(m.rows);
  for (std::size_t i = 0; i < tsv.rows.size(); ++i) {
    const auto& r = tsv.rows[i];
    const auto idx = util::parse_u64(r.fields[0], r.line, "row");
    require(idx == i, ErrorKind::schema,
            labels_path.string() + ": line " + std::to_string(r.line) + ": expected row " +
                std::to_string(i));
    require(!r.fields[1].empty(), ErrorKind::schema,
            labels_path.string() + ": line " + std::to_string(r.line) + ": empty label");
    require(!r.fields[2].empty(), ErrorKind::schema,
            labels_path.string() + ": line " + std::to_string(r.line) + ": empty lemma");
    labels.push_back(r.fields[1]);
    lemmas.push_back(r.fields[2]);
    if (with_split) {
      const auto s = parse_split(r.fields[3]);
      require(s.has_value(), ErrorKind::schema,
              labels_path.string() + ": line " + std::to_string(r.line) + ": unknown split '" +
                  r.fields[3] + "'");
      splits.push_back(*s);
    }
  }
  std::vector<double> matrix(m.values.begin(), m.values.end());
  return make_dataset(m.cols, std::move(matrix), labels, std::move(lemmas), std::move(splits));
}

std::string encode_labels(const ReprDataset& ds) {
  std::string out = ds.has_splits() ? "row\tlabel\tlemma\tsplit\n" : "row\tlabel\tlemma\n";
  for (std::size_t i = 0; i < ds.n_rows; ++i) {
    out += std::to_string(i);
    out += '\t';
    out += ds.label(i);
    out += '\t';
    out += ds.lemmas[i];
    if (ds.has_splits()) {
      out += '\t';
      out += to_string(ds.splits[i]);
    }
    out += '\n';
  }
  return out;
}

void write_representations(const ReprDataset& ds, const std::filesystem::path& matrix_path,
                           const std::filesystem::path& labels_path) {
  ds.validate();
  FprbMatrix m;
  m.rows = ds.n_rows;
  m.cols = static_cast<std::uint32_t>(ds.dim);
  m.values.assign(ds.matrix.begin(), ds.matrix.end());
  util::write_file_atomic(matrix_path, encode_fprb(m));
  util::write_file_atomic(labels_path, encode_labels(ds));
}

ReprDataset lemma_disjoint_split(const ReprDataset& ds, std::array<double, 3> ratios,
                                 std::uint64_t seed) {
  double total = 0.0;
  for (double r : ratios) {
    require(r >= 0.0 && std::isfinite(r), ErrorKind::domain, "split ratios must be non-negative");
    total += r;
  }
  require(std::abs(total - 1.0) <= 1e-9, ErrorKind::domain, "split ratios must sum to 1");

  std::map<std::string, std::size_t> lemma_rows;
  for (const auto& l : ds.lemmas) ++lemma_rows[l];
  const auto non_empty = static_cast<std::size_t>(std::count_if(
      ratios.begin(), ratios.end(), [](double r) { return r > 0.0; }));
  require(lemma_rows.size() >= non_empty, ErrorKind::infeasible,
          std::to_string(lemma_rows.size()) + " distinct lemmas cannot fill " +
              std::to_string(non_empty) + " non-empty splits");

  std::vector<std::string> order;
  order.reserve(lemma_rows.size());
  for (const auto& [lemma, _] : lemma_rows) order.push_back(lemma);
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());

  const double n = static_cast<double>(ds.n_rows);
  std::array<std::size_t, 3> filled{0, 0, 0};
  std::map<std::string, Split> assignment;
  for (const auto& lemma : order) {
    std::size_t best = 3;
    double best_deficit = 0.0;
    for (std::size_t s = 0; s < 3; ++s) {
      if (ratios[s] <= 0.0) continue;
      const double deficit = ratios[s] - static_cast<double>(filled[s]) / n;
      if (best == 3 || deficit > best_deficit) {
        best = s;
        best_deficit = deficit;
      }
    }
    filled[best] += lemma_rows[lemma];
    assignment[lemma] = static_cast<Split>(best);
  }

  ReprDataset out = ds;
  out.splits.resize(ds.n_rows);
  for (std::size_t i = 0; i < ds.n_rows; ++i) out.splits[i] = assignment[ds.lemmas[i]];
  return out;
}

ReprDataset select_rows(const ReprDataset& ds, std::span<const std::size_t> rows) {
  std::vector<double> matrix;
  matrix.reserve(rows.size() * ds.dim);
  std::vector<std::string> labels, lemmas;
  std::vector<Split> splits;
  for (std::size_t r : rows) {
    require(r < ds.n_rows, ErrorKind::domain, "row index out of range");
    const auto row = ds.row(r);
    matrix.insert(matrix.end(), row.begin(), row.end());
    labels.push_back(ds.label(r));
    lemmas.push_back(ds.lemmas[r]);
    if (ds.has_splits()) splits.push_back(ds.splits[r]);
  }
  require(!rows.empty(), ErrorKind::empty, "row selection is empty");
  return make_dataset(ds.dim, std::move(matrix), labels, std::move(lemmas), std::move(splits));
}

ReprDataset filter_rare_values(const ReprDataset& ds, std::size_t min_count) {
  std::vector<std::size_t> counts(ds.inventory.size(), 0);
  for (std::size_t l : ds.labels) ++counts[l];
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < ds.n_rows; ++i) {
    if (counts[ds.labels[i]] >= min_count) keep.push_back(i);
  }
  require(!keep.empty(), ErrorKind::empty,
          "every label value occurs fewer than " + std::to_string(min_count) + " times");
  return select_rows(ds, keep);
}

std::vector<std::size_t> rows_in_split(const ReprDataset& ds, Split s) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ds.n_rows; ++i) {
    if (!ds.has_splits() ? s == Split::train : ds.splits[i] == s) out.push_back(i);
  }
  return out;
}

Holdout carve_holdout(std::span<const std::size_t> rows, double fraction, std::uint64_t seed) {
  require(fraction >= 0.0 && fraction < 1.0, ErrorKind::domain,
          "holdout fraction must be in [0, 1)");
  std::vector<std::size_t> shuffled(rows.begin(), rows.end());
  Rng rng(seed);
  rng.shuffle(shuffled.begin(), shuffled.end());
  auto n_hold = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(rows.size())));
  if (fraction > 0.0 && n_hold == 0 && rows.size() >= 2) n_hold = 1;
  Holdout h;
  h.holdout.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_hold));
  h.fit.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_hold), shuffled.end());
  std::sort(h.holdout.begin(), h.holdout.end());
  std::sort(h.fit.begin(), h.fit.end());
  return h;
}

}  // namespace latprobe::io
