#pragma once

// Perplexity-based fairness scores. For a stereotype s in category c, each
// identity i has a normalized perplexity PPL(i + s) / PPL(i); scores are taken
// over log10 of that ratio across identities.

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "latprobe/io/tables.hpp"

namespace latprobe::fairness {

/// exp(-mean(ll)) for natural-log token likelihoods.
double ppl_from_token_loglikes(std::span<const double> ll);

/// ppl_probe / ppl_identity.
double normalized_ppl(const io::PplRecord& r);

/// Population variance of log10 normalized PPL across identities (>= 2 required).
double stereotype_variance(const std::vector<io::PplRecord>& records);

/// max - min of log10 normalized PPL across identities (>= 2 required).
double dds(const std::vector<io::PplRecord>& records);

/// Identity with the lowest normalized PPL; ties go to the smaller identity string.
std::string argmin_identity(const std::vector<io::PplRecord>& records);

struct StereotypeStats {
  std::string category;
  std::string stereotype;
  std::size_t n_identities = 0;
  double variance = 0.0;
  double dds = 0.0;
  std::string argmin_identity;
};

struct CategoryStats {
  std::string category;
  double score = 0.0;                   // mean stereotype variance
  std::vector<std::string> lowest_dds;  // up to top_n stereotypes, ascending DDS
};

struct FairnessReport {
  std::vector<StereotypeStats> stereotypes;  // by (category, stereotype)
  std::vector<CategoryStats> categories;     // by category
  double sofa = 0.0;                          // unweighted mean of category scores
  std::vector<std::pair<std::string, std::string>> skipped;  // single-identity stereotypes
  std::vector<std::string> warnings;
};

/// Records grouped by (category, stereotype).
std::map<std::pair<std::string, std::string>, std::vector<io::PplRecord>> group_records(const io::PplTable& t);

struct IntraRankings {
  std::vector<StereotypeStats> argmin;  // every stereotype, variance/dds left at 0 when single-identity
  std::map<std::string, std::vector<std::string>> lowest_dds;  // category -> stereotypes by ascending DDS
};

IntraRankings intra_rankings(const io::PplTable& t, std::size_t top_n);

FairnessReport sofa_score(const io::PplTable& t, std::size_t top_n = 5);

/// `category  stereotype_id  variance  dds  argmin_identity`.
std::string format_report_tsv(const FairnessReport& r);

}  // namespace latprobe::fairness
