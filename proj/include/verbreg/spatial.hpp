#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "verbreg/geo.hpp"
#include "verbreg/ingest.hpp"
#include "verbreg/lexicon.hpp"

namespace verbreg {

// ---------------------------------------------------------------------------
// Volume regression

struct RegressionFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t n = 0;
};

// Ordinary least squares of y on x. Needs n >= 2 and a nonconstant x.
RegressionFit fit_linear(std::span<const double> x, std::span<const double> y);

// OLS of y on log10(d). Throws for d <= 0 or a constant log10(d).
RegressionFit fit_log_volume(std::span<const double> d, std::span<const double> y);

// value - (intercept + slope * log10(d)).
double residualize(const RegressionFit& fit, double d, double value);

// ---------------------------------------------------------------------------
// Distances and weights

inline constexpr double kEarthRadiusMiles = 3958.7613;
inline constexpr double kMinDistanceMiles = 10.0;
// Above this many counties the weight matrix is never materialized.
inline constexpr std::size_t kDenseWeightLimit = 5000;

// Haversine distance.
double great_circle_miles(const GeoPoint& a, const GeoPoint& b);

// Dense row-major n x n matrix.
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n, double fill = 0.0) : n_(n), data_(n * n, fill) {}

  std::size_t size() const noexcept { return n_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * n_, n_}; }

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

// s_ij = max(great-circle miles between centers, 10).
SquareMatrix distance_matrix(std::span<const GeoPoint> centers, std::size_t workers = 1);
SquareMatrix distance_matrix(std::span<const County> counties, std::size_t workers = 1);

// w_ij = 1 / sqrt(s_ij).
SquareMatrix weight_matrix(const SquareMatrix& distances);

// Getis-Ord Gi* z-score for every location with the sums running over all j,
// the diagonal included. Throws Error(degenerate) when the values have zero
// spread. A row whose weights are all equal has an undefined score and
// yields NaN.
std::vector<double> gi_star(std::span<const double> values, const SquareMatrix& weights,
                            std::size_t workers = 1);

// Same statistic with weights recomputed row by row from the centers.
std::vector<double> gi_star_streamed(std::span<const double> values,
                                     std::span<const GeoPoint> centers, std::size_t workers = 1);

// Dense up to kDenseWeightLimit locations, streamed above.
std::vector<double> gi_star_for_centers(std::span<const double> values,
                                        std::span<const GeoPoint> centers,
                                        std::size_t workers = 1);

// ---------------------------------------------------------------------------
// Significance

enum class Cluster { high, low, none };

struct Significance {
  Cluster uncorrected = Cluster::none;
  Cluster bonferroni = Cluster::none;
};

// Two-tailed |z| cutoff at level alpha / n_tests.
double two_tailed_threshold(double alpha, std::size_t n_tests = 1);

Significance significance(double z, std::size_t n_tests, double alpha = 0.05);

// cluster_high[_bonferroni], cluster_low[_bonferroni] or not_significant.
std::string significance_label(const Significance& s);

// ---------------------------------------------------------------------------
// Pipelines

struct SpatialOptions {
  std::uint64_t min_tokens = 40;
  double alpha = 0.05;
  std::size_t workers = 1;
};

struct CountyRow {
  std::string fips;
  std::uint64_t d = 0;     // total verb tokens
  double R = 0.0;          // average regularization fraction
  double residual = 0.0;   // R minus the log-volume fit
  double gi_z = 0.0;
  Significance sig;
};

struct ExcludedCounty {
  std::string fips;
  std::uint64_t d = 0;
  std::string reason;
};

struct CountyPanel {
  std::vector<CountyRow> rows;  // fips order
  std::vector<ExcludedCounty> excluded;
  RegressionFit fit;
  bool has_gi = false;
};

inline constexpr const char* kInsufficientData = "insufficient data";
inline constexpr const char* kMissingGeometry = "missing geometry";

// Threshold filter, R_i and log-volume residuals; no spatial statistic.
// Counties absent from `geometry` are excluded when it is given.
CountyPanel build_volume_panel(const ScopeMap& counts, const Lexicon& lexicon,
                               std::uint64_t min_tokens, const CountyIndex* geometry = nullptr);

// build_volume_panel followed by Gi* on the residuals and significance tests
// with a Bonferroni family of the included counties.
CountyPanel county_pipeline(const ScopeMap& counts, const Lexicon& lexicon,
                            const CountyIndex& geometry, const SpatialOptions& options = {});

struct VerbMapRow {
  std::string fips;
  std::uint64_t tokens = 0;
  double fraction = 0.0;
  double gi_z = 0.0;
  Significance sig;
};

struct VerbPanel {
  std::string lemma;
  std::vector<VerbMapRow> rows;
  std::vector<ExcludedCounty> excluded;
};

// Per-county fraction of one lemma and Gi* on the fractions directly.
// options.min_tokens applies to that lemma's tokens (10 by convention).
VerbPanel verb_pipeline(const ScopeMap& counts, const Lexicon& lexicon, std::string_view lemma,
                        const CountyIndex& geometry, const SpatialOptions& options);

// CSV `fips,d,R,residual,gi_z,significance`; excluded counties carry empty
// values and the label insufficient_data (or missing_geometry).
void write_panel_csv(std::ostream& out, const CountyPanel& panel);
void write_verb_panel_csv(std::ostream& out, const VerbPanel& panel);

// County geometry as a FeatureCollection with panel values joined as properties.
void write_panel_geojson(std::ostream& out, const CountyPanel& panel, const CountyIndex& geometry);
void write_verb_panel_geojson(std::ostream& out, const VerbPanel& panel,
                              const CountyIndex& geometry);

}  // namespace verbreg
