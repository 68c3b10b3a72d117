#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "verbreg/ingest.hpp"
#include "verbreg/lexicon.hpp"

namespace verbreg {

// regular / (regular + irregular). Throws Error(precondition) for negative
// weights or a zero denominator.
double regularization_fraction(double regular, double irregular);

// Regular iff the fraction is strictly greater than one half.
FormClass classify(double fraction);

struct VerbFraction {
  std::string lemma;
  double regular = 0.0;
  double irregular = 0.0;
  double fraction = 0.0;
};

struct RegularizationTable {
  std::string scope_id;
  std::vector<VerbFraction> rows;  // lexicon order
  // Unweighted mean of the row fractions; empty when there are no rows.
  std::optional<double> average;

  std::size_t verb_count() const noexcept { return rows.size(); }
  const VerbFraction* find(std::string_view lemma) const;
};

// Unweighted mean of regular / (regular + irregular) over the entries with a
// nonzero total; empty when no entry qualifies.
std::optional<double> average_fraction(std::span<const VerbCounts> counts);

using VerbFilter = std::function<bool(const VerbEntry&)>;

inline bool t_subset_filter(const VerbEntry& e) { return e.t_subset; }

// Rows for lemmas that pass the filter and have a nonzero denominator.
RegularizationTable build_table(const ScopeWeights& weights, const Lexicon& lexicon,
                                const VerbFilter& filter = {});
RegularizationTable build_table(const PastTenseCounts& counts, const Lexicon& lexicon,
                                const VerbFilter& filter = {});

// CSV `lemma,regular,irregular,fraction`.
void write_table_csv(std::ostream& out, const RegularizationTable& table);
RegularizationTable read_table_csv(std::istream& in, std::string scope_id);
std::string table_to_json(const RegularizationTable& table);

// ---------------------------------------------------------------------------

struct DifferenceRow {
  std::string lemma;
  double a = 0.0;
  double b = 0.0;
  double difference = 0.0;  // a - b
};

struct DifferenceTable {
  std::vector<DifferenceRow> rows;
  double average = 0.0;
};

// Per-lemma a - b over the shared lemmas, in the order of `a`.
DifferenceTable difference_table(const RegularizationTable& a, const RegularizationTable& b);

void write_difference_csv(std::ostream& out, const DifferenceTable& table);

// ---------------------------------------------------------------------------

enum class PValueMethod { exact, normal };

struct PairedTestResult {
  std::size_t n_pairs = 0;      // all pairs supplied
  std::size_t n_effective = 0;  // pairs with a nonzero difference
  double statistic = 0.0;       // W+: rank sum of the positive differences x - y
  double p_value = 1.0;         // two-sided
  std::size_t n_greater_first = 0;
  std::size_t n_greater_second = 0;
  PValueMethod method = PValueMethod::exact;
};

inline constexpr std::size_t kWilcoxonExactMaxN = 25;

// Two-sided Wilcoxon signed-rank test on x - y. Zero differences are
// dropped, tied magnitudes share mean ranks. Up to kWilcoxonExactMaxN
// effective pairs the p-value is exact under the sign-flip distribution of
// the observed ranks; above it, the normal approximation with tie and
// continuity corrections is used. Throws Error(degenerate) if every
// difference is zero.
PairedTestResult wilcoxon_signed_rank(std::span<const std::pair<double, double>> pairs);

std::string to_json(const PairedTestResult& result);

struct CorrelationResult {
  double r = 0.0;
  double p_value = 1.0;  // two-sided, t distribution with n - 2 df
  std::size_t n = 0;
};

// Both require equal lengths >= 3 and nonconstant inputs, else throw.
CorrelationResult pearson(std::span<const double> x, std::span<const double> y);
CorrelationResult spearman(std::span<const double> x, std::span<const double> y);

// Mean ranks (1-based) of the values, ties sharing the average rank.
std::vector<double> fractional_ranks(std::span<const double> values);

// Two-sided p-value of a correlation r over n samples.
double correlation_p_value(double r, std::size_t n);

// ---------------------------------------------------------------------------

enum class FrequencyBand { high, mid, low };

const char* to_string(FrequencyBand band);

struct FrequencyBin {
  FrequencyBand label;
  std::uint64_t lower = 0;  // inclusive
  std::uint64_t upper = 0;  // exclusive, except the high bin which is inclusive
  std::vector<std::string> lemmas;
};

// high [1e6, 1e8], mid [1e4, 1e6), low [1e2, 1e4) by total past-tense tokens.
// Lemmas outside [1e2, 1e8] are left unbinned.
std::vector<FrequencyBin> bin_verbs(const PastTenseCounts& pool_counts, const Lexicon& lexicon);

}  // namespace verbreg
