#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "verbreg/ingest.hpp"
#include "verbreg/spatial.hpp"
#include "verbreg/stats.hpp"

namespace verbreg {

// ---------------------------------------------------------------------------
// Sampling simulation

struct TokenPool {
  std::vector<VerbCounts> per_lemma;
  std::uint64_t total_tokens = 0;
};

// Componentwise sum of every scope. Throws Error(precondition) when the
// input is empty or holds no tokens.
TokenPool build_pool(std::span<const PastTenseCounts> counts);
TokenPool build_pool(const ScopeMap& scopes);

// `count` sizes evenly spaced in log10 between lo and hi, rounded to the
// nearest integer (duplicates at the small end are kept).
std::vector<std::uint64_t> log_spaced_sizes(std::size_t count = 1000, double lo = 10.0,
                                            double hi = 1e7);

struct SyntheticCounty {
  std::uint64_t target_size = 0;
  std::size_t size_index = 0;
  std::size_t replicate = 0;
  std::vector<VerbCounts> drawn;  // emptied unless SynthOptions::keep_counts
  std::optional<double> average_fraction;
};

struct SynthOptions {
  std::size_t replicates = 5;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  bool keep_counts = true;
};

// Seed of one (size, replicate) task: splitmix64 over the run seed and the
// two indices, so results do not depend on scheduling.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t size_index, std::uint64_t replicate);

// Draws each synthetic county as a multinomial sample, with replacement, of
// target_size tokens over the pool's (lemma, class) cells. The generator is
// mt19937_64 feeding conditional binomials (boost::random), one stream per task.
std::vector<SyntheticCounty> sample_synthetic(const TokenPool& pool,
                                              std::span<const std::uint64_t> sizes,
                                              const SynthOptions& options);

// synthetic.csv: `size,replicate,avg_fraction`.
void write_synthetic_csv(std::ostream& out, const std::vector<SyntheticCounty>& counties);

// ---------------------------------------------------------------------------
// Demographic correlations

enum class VariableKind { estimate, percent };

const char* to_string(VariableKind kind);

struct DemographicVariable {
  std::string id;
  VariableKind kind = VariableKind::percent;
  std::map<std::string, double> values;  // fips -> D_i; missing cells are absent
};

// Wide CSV, one row per county. Columns whose name starts with "Estimate;"
// or "Percent;" become variables; other columns are ignored. If the row after
// the header has a non-numeric fips cell it is taken as the label row holding
// the variable names (the two-header layout of census downloads).
std::vector<DemographicVariable> read_acs_csv(std::istream& in,
                                              const std::string& fips_column = "GEO.id2");
std::vector<DemographicVariable> load_acs_csv(const std::filesystem::path& path,
                                              const std::string& fips_column = "GEO.id2");

struct DemographicResiduals {
  std::vector<std::string> fips;
  std::vector<double> transformed;  // log10(D_i) for Estimate, D_i for Percent
  std::vector<double> residuals;
  RegressionFit fit;
};

// Regresses the (possibly logged) variable on log10(d) over the counties
// present in both maps. Estimate counties with D_i <= 0 are dropped.
// Residuals below numerical resolution of the fit are snapped to zero.
DemographicResiduals residualize_demographic(const DemographicVariable& variable,
                                             const std::map<std::string, double>& volume);

// Pearson correlation between the two residual vectors.
CorrelationResult partial_correlation(std::span<const double> r_reg, std::span<const double> r_dem);

struct VariableCorrelation {
  std::string id;
  VariableKind kind = VariableKind::percent;
  std::size_t n = 0;
  std::optional<double> simple_r;      // against log10(D) for Estimate variables
  std::optional<double> simple_r_raw;  // against raw D (Estimate only)
  std::optional<double> partial_r;
  std::optional<double> partial_p;
  std::string failure;                 // empty when ranked
};

// Simple and partial correlation of every variable with R over the shared
// counties; the regularization residuals are refit on each variable's county
// set. Ranked variables come first, by |partial| descending with ties by id;
// variables that failed follow, sorted by id.
std::vector<VariableCorrelation> rank_variables(std::span<const DemographicVariable> variables,
                                                const CountyPanel& panel, std::size_t workers = 1);

// partials.csv: `variable,kind,simple_r,partial_r,n,simple_r_raw,status`.
void write_partials_csv(std::ostream& out, const std::vector<VariableCorrelation>& ranked);

}  // namespace verbreg
