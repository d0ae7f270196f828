#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace latprobe::io {

enum class Split : std::uint8_t { train = 0, dev = 1, test = 2 };

std::string_view to_string(Split s) noexcept;
std::optional<Split> parse_split(std::string_view s) noexcept;

/// N labeled d-dimensional rows with lemma keys and optional split tags.
/// Values are single precision on disk and double precision here.
struct ReprDataset {
  std::size_t n_rows = 0;
  std::size_t dim = 0;
  std::vector<double> matrix;           // n_rows x dim, row-major
  std::vector<std::string> inventory;   // label values, lexicographic
  std::vector<std::size_t> labels;      // per row, index into inventory
  std::vector<std::string> lemmas;      // per row
  std::vector<Split> splits;            // empty when untagged, else per row

  std::span<const double> row(std::size_t i) const { return {matrix.data() + i * dim, dim}; }
  const std::string& label(std::size_t i) const { return inventory[labels[i]]; }
  bool has_splits() const { return !splits.empty(); }

  /// Throws on any invariant violation.
  void validate() const;
};

/// Builds a dataset from per-row string labels; the inventory is derived and sorted.
ReprDataset make_dataset(std::size_t dim, std::vector<double> matrix,
                         const std::vector<std::string>& labels, std::vector<std::string> lemmas,
                         std::vector<Split> splits = {});

// FPRB: "FPRB" | u32 version=1 | u64 N | u32 d | u32 reserved=0 | N*d float32, little-endian.
struct FprbMatrix {
  std::uint64_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<float> values;
};

FprbMatrix decode_fprb(std::string_view bytes);
std::string encode_fprb(const FprbMatrix& m);

ReprDataset load_representations(const std::filesystem::path& matrix_path,
                                 const std::filesystem::path& labels_path);

void write_representations(const ReprDataset& ds, const std::filesystem::path& matrix_path,
                           const std::filesystem::path& labels_path);

/// Labels TSV text for `ds` (the exact bytes write_representations emits).
std::string encode_labels(const ReprDataset& ds);

/// Shuffles lemmas with `seed`, then assigns each to the split whose row
/// fraction is furthest below its target ratio (ties to the lower split).
ReprDataset lemma_disjoint_split(const ReprDataset& ds, std::array<double, 3> ratios,
                                 std::uint64_t seed);

/// Drops rows whose label occurs fewer than `min_count` times overall.
ReprDataset filter_rare_values(const ReprDataset& ds, std::size_t min_count = 20);

/// Row subset; the inventory is recomputed from the kept rows.
ReprDataset select_rows(const ReprDataset& ds, std::span<const std::size_t> rows);

std::vector<std::size_t> rows_in_split(const ReprDataset& ds, Split s);

/// Row-level random holdout carved from `rows` (early stopping set).
struct Holdout {
  std::vector<std::size_t> fit;
  std::vector<std::size_t> holdout;
};
Holdout carve_holdout(std::span<const std::size_t> rows, double fraction, std::uint64_t seed);

}  // namespace latprobe::io
