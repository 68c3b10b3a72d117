#include "verbreg/spatial.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <numbers>
#include <numeric>
#include <ostream>

#include "verbreg/error.hpp"
#include "verbreg/parallel.hpp"
#include "verbreg/stats.hpp"

namespace verbreg {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Volume regression

RegressionFit fit_linear(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::precondition, "regression: length mismatch");
  if (x.size() < 2) throw Error(ErrorKind::precondition, "regression: need at least 2 points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; }) || sxx <= 0.0)
    throw Error(ErrorKind::degenerate, "regression: constant predictor");
  RegressionFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.n = x.size();
  if (!std::isfinite(fit.slope) || !std::isfinite(fit.intercept))
    throw Error(ErrorKind::degenerate, "regression: non-finite fit");
  return fit;
}

RegressionFit fit_log_volume(std::span<const double> d, std::span<const double> y) {
  std::vector<double> logs(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!(d[i] > 0.0)) throw Error(ErrorKind::precondition, "regression: data volume must be positive");
    logs[i] = std::log10(d[i]);
  }
  return fit_linear(logs, y);
}

double residualize(const RegressionFit& fit, double d, double value) {
  if (!(d > 0.0)) throw Error(ErrorKind::precondition, "residualize: data volume must be positive");
  return value - (fit.intercept + fit.slope * std::log10(d));
}

// ---------------------------------------------------------------------------
// Distances and weights

double great_circle_miles(const GeoPoint& a, const GeoPoint& b) {
  constexpr double rad = std::numbers::pi / 180.0;
  const double dlat = (b.lat - a.lat) * rad;
  const double dlon = (b.lon - a.lon) * rad;
  const double h = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(a.lat * rad) * std::cos(b.lat * rad) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadiusMiles * std::asin(std::min(1.0, std::sqrt(h)));
}

namespace {

double floored_distance(const GeoPoint& a, const GeoPoint& b) {
  return std::max(great_circle_miles(a, b), kMinDistanceMiles);
}

struct RowSums {
  double w = 0.0;
  double w2 = 0.0;
  double wr = 0.0;
};

struct Moments {
  double mean = 0.0;
  double sigma = 0.0;
};

Moments value_moments(std::span<const double> values) {
  if (values.size() < 2) throw Error(ErrorKind::precondition, "Gi*: need at least 2 locations");
  const double n = static_cast<double>(values.size());
  Moments m;
  m.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  double scale = 1.0;
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorKind::precondition, "Gi*: non-finite value");
    ss += (v - m.mean) * (v - m.mean);
    scale = std::max(scale, std::abs(v));
  }
  // Population standard deviation; algebraically sqrt(sum r^2 / n - mean^2).
  m.sigma = std::sqrt(ss / n);
  if (m.sigma <= 1e-12 * scale) throw Error(ErrorKind::degenerate, "Gi*: values have zero spread");
  return m;
}

double gi_from_sums(const RowSums& s, const Moments& m, double n) {
  const double spread = (n * s.w2 - s.w * s.w) / (n - 1.0);
  // Equal weights across the whole row leave the statistic undefined.
  if (spread <= 1e-14 * s.w2 * n) return std::numeric_limits<double>::quiet_NaN();
  return (s.wr - m.mean * s.w) / (m.sigma * std::sqrt(spread));
}

}  // namespace

SquareMatrix distance_matrix(std::span<const GeoPoint> centers, std::size_t workers) {
  const std::size_t n = centers.size();
  SquareMatrix s(n, kMinDistanceMiles);
  // Each row is written by one worker; the upper triangle is mirrored after.
  parallel_for(n, workers, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < n; ++j) s(i, j) = floored_distance(centers[i], centers[j]);
  });
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) s(i, j) = s(j, i);
  return s;
}

SquareMatrix distance_matrix(std::span<const County> counties, std::size_t workers) {
  std::vector<GeoPoint> centers;
  centers.reserve(counties.size());
  for (const auto& c : counties) centers.push_back(c.bbox_center);
  return distance_matrix(centers, workers);
}

SquareMatrix weight_matrix(const SquareMatrix& distances) {
  const std::size_t n = distances.size();
  SquareMatrix w(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double s = distances(i, j);
      if (!(s >= kMinDistanceMiles))
        throw Error(ErrorKind::precondition, "weight matrix: distance below the 10 mile floor");
      w(i, j) = 1.0 / std::sqrt(s);
    }
  return w;
}

std::vector<double> gi_star(std::span<const double> values, const SquareMatrix& weights,
                            std::size_t workers) {
  const std::size_t n = values.size();
  if (weights.size() != n) throw Error(ErrorKind::precondition, "Gi*: weight matrix size mismatch");
  const Moments m = value_moments(values);
  std::vector<double> z(n);
  parallel_for(n, workers, [&](std::size_t i) {
    RowSums s;
    const auto row = weights.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      s.w += row[j];
      s.w2 += row[j] * row[j];
      s.wr += row[j] * values[j];
    }
    z[i] = gi_from_sums(s, m, static_cast<double>(n));
  });
  return z;
}

std::vector<double> gi_star_streamed(std::span<const double> values,
                                     std::span<const GeoPoint> centers, std::size_t workers) {
  const std::size_t n = values.size();
  if (centers.size() != n) throw Error(ErrorKind::precondition, "Gi*: centers size mismatch");
  const Moments m = value_moments(values);
  std::vector<double> z(n);
  parallel_for(n, workers, [&](std::size_t i) {
    RowSums s;
    for (std::size_t j = 0; j < n; ++j) {
      const double w = 1.0 / std::sqrt(i == j ? kMinDistanceMiles : floored_distance(centers[i], centers[j]));
      s.w += w;
      s.w2 += w * w;
      s.wr += w * values[j];
    }
    z[i] = gi_from_sums(s, m, static_cast<double>(n));
  });
  return z;
}

std::vector<double> gi_star_for_centers(std::span<const double> values,
                                        std::span<const GeoPoint> centers, std::size_t workers) {
  if (centers.size() > kDenseWeightLimit) return gi_star_streamed(values, centers, workers);
  return gi_star(values, weight_matrix(distance_matrix(centers, workers)), workers);
}

// ---------------------------------------------------------------------------
// Significance

double two_tailed_threshold(double alpha, std::size_t n_tests) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::precondition, "alpha must be in (0, 1)");
  if (n_tests < 1) throw Error(ErrorKind::precondition, "need at least one test");
  const boost::math::normal standard;
  return boost::math::quantile(boost::math::complement(standard, alpha / (2.0 * static_cast<double>(n_tests))));
}

Significance significance(double z, std::size_t n_tests, double alpha) {
  const double plain = two_tailed_threshold(alpha, 1);
  const double corrected = two_tailed_threshold(alpha, n_tests);
  const auto level = [&](double cutoff) {
    if (!std::isfinite(z) || std::abs(z) <= cutoff) return Cluster::none;
    return z > 0 ? Cluster::high : Cluster::low;
  };
  return {level(plain), level(corrected)};
}

std::string significance_label(const Significance& s) {
  if (s.uncorrected == Cluster::none) return "not_significant";
  std::string label = s.uncorrected == Cluster::high ? "cluster_high" : "cluster_low";
  if (s.bonferroni != Cluster::none) label += "_bonferroni";
  return label;
}

// ---------------------------------------------------------------------------
// Pipelines

namespace {

std::string label_for(const std::string& reason) {
  std::string out = reason;
  std::replace(out.begin(), out.end(), ' ', '_');
  return out;
}

std::string num(double v) {
  if (!std::isfinite(v)) return "";
  return fmt::format("{}", v);
}

json num_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json polygon_geometry(const County& c) {
  json multi = json::array();
  for (const auto& poly : c.polygons) {
    json rings = json::array();
    for (const auto& ring : poly.rings) {
      json coords = json::array();
      for (const auto& p : ring) coords.push_back({p.lon, p.lat});
      coords.push_back({ring.front().lon, ring.front().lat});
      rings.push_back(std::move(coords));
    }
    multi.push_back(std::move(rings));
  }
  return {{"type", "MultiPolygon"}, {"coordinates", std::move(multi)}};
}

std::vector<GeoPoint> centers_of(const std::vector<std::string>& fips, const CountyIndex& geometry) {
  std::vector<GeoPoint> centers;
  centers.reserve(fips.size());
  for (const auto& f : fips) centers.push_back(geometry.find(f)->bbox_center);
  return centers;
}

}  // namespace

CountyPanel build_volume_panel(const ScopeMap& counts, const Lexicon& lexicon,
                               std::uint64_t min_tokens, const CountyIndex* geometry) {
  CountyPanel panel;
  std::vector<double> d, R;
  for (const auto& [fips, c] : counts) {
    const std::uint64_t total = c.total();
    if (total < min_tokens || total == 0) {
      panel.excluded.push_back({fips, total, kInsufficientData});
      continue;
    }
    if (geometry != nullptr && geometry->find(fips) == nullptr) {
      panel.excluded.push_back({fips, total, kMissingGeometry});
      continue;
    }
    const auto table = build_table(c, lexicon);
    CountyRow row;
    row.fips = fips;
    row.d = total;
    row.R = *table.average;
    panel.rows.push_back(row);
    d.push_back(static_cast<double>(total));
    R.push_back(row.R);
  }
  if (panel.rows.size() < 2)
    throw Error(ErrorKind::precondition, "fewer than 2 counties meet the token threshold");
  panel.fit = fit_log_volume(d, R);
  for (auto& row : panel.rows) row.residual = residualize(panel.fit, static_cast<double>(row.d), row.R);
  return panel;
}

CountyPanel county_pipeline(const ScopeMap& counts, const Lexicon& lexicon,
                            const CountyIndex& geometry, const SpatialOptions& options) {
  CountyPanel panel = build_volume_panel(counts, lexicon, options.min_tokens, &geometry);
  std::vector<std::string> fips;
  std::vector<double> residuals;
  for (const auto& r : panel.rows) {
    fips.push_back(r.fips);
    residuals.push_back(r.residual);
  }
  const auto z = gi_star_for_centers(residuals, centers_of(fips, geometry), options.workers);
  for (std::size_t i = 0; i < panel.rows.size(); ++i) {
    panel.rows[i].gi_z = z[i];
    panel.rows[i].sig = significance(z[i], panel.rows.size(), options.alpha);
  }
  panel.has_gi = true;
  return panel;
}

VerbPanel verb_pipeline(const ScopeMap& counts, const Lexicon& lexicon, std::string_view lemma,
                        const CountyIndex& geometry, const SpatialOptions& options) {
  const auto idx = lexicon.index_of(lemma);
  if (!idx) throw Error(ErrorKind::precondition, "unknown lemma '" + std::string(lemma) + "'");
  VerbPanel panel;
  panel.lemma = std::string(lemma);
  std::vector<std::string> fips;
  std::vector<double> fractions;
  for (const auto& [f, c] : counts) {
    const auto& v = c.per_lemma.at(*idx);
    if (v.total() < options.min_tokens || v.total() == 0) {
      panel.excluded.push_back({f, v.total(), kInsufficientData});
      continue;
    }
    if (geometry.find(f) == nullptr) {
      panel.excluded.push_back({f, v.total(), kMissingGeometry});
      continue;
    }
    VerbMapRow row;
    row.fips = f;
    row.tokens = v.total();
    row.fraction = regularization_fraction(static_cast<double>(v.regular), static_cast<double>(v.irregular));
    panel.rows.push_back(row);
    fips.push_back(f);
    fractions.push_back(row.fraction);
  }
  if (panel.rows.size() < 2)
    throw Error(ErrorKind::precondition, "fewer than 2 counties meet the token threshold for '" +
                                           panel.lemma + "'");
  const auto z = gi_star_for_centers(fractions, centers_of(fips, geometry), options.workers);
  for (std::size_t i = 0; i < panel.rows.size(); ++i) {
    panel.rows[i].gi_z = z[i];
    panel.rows[i].sig = significance(z[i], panel.rows.size(), options.alpha);
  }
  return panel;
}

void write_panel_csv(std::ostream& out, const CountyPanel& panel) {
  struct Line {
    std::string fips, text;
  };
  std::vector<Line> lines;
  for (const auto& r : panel.rows)
    lines.push_back({r.fips, fmt::format("{},{},{},{},{},{}", r.fips, r.d, num(r.R), num(r.residual),
                                         panel.has_gi ? num(r.gi_z) : "",
                                         panel.has_gi ? significance_label(r.sig) : "")});
  for (const auto& e : panel.excluded)
    lines.push_back({e.fips, fmt::format("{},{},,,,{}", e.fips, e.d, label_for(e.reason))});
  std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) { return a.fips < b.fips; });
  out << "fips,d,R,residual,gi_z,significance\n";
  for (const auto& l : lines) out << l.text << '\n';
}

void write_verb_panel_csv(std::ostream& out, const VerbPanel& panel) {
  struct Line {
    std::string fips, text;
  };
  std::vector<Line> lines;
  for (const auto& r : panel.rows)
    lines.push_back({r.fips, fmt::format("{},{},{},{},{}", r.fips, r.tokens, num(r.fraction),
                                         num(r.gi_z), significance_label(r.sig))});
  for (const auto& e : panel.excluded)
    lines.push_back({e.fips, fmt::format("{},{},,,{}", e.fips, e.d, label_for(e.reason))});
  std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) { return a.fips < b.fips; });
  out << "fips,tokens,fraction,gi_z,significance\n";
  for (const auto& l : lines) out << l.text << '\n';
}

void write_panel_geojson(std::ostream& out, const CountyPanel& panel, const CountyIndex& geometry) {
  json features = json::array();
  for (const auto& c : geometry.counties()) {
    json props = {{"fips", c.fips}, {"name", c.name}};
    const auto row = std::find_if(panel.rows.begin(), panel.rows.end(),
                                  [&](const CountyRow& r) { return r.fips == c.fips; });
    if (row != panel.rows.end()) {
      props["d"] = row->d;
      props["R"] = num_json(row->R);
      props["residual"] = num_json(row->residual);
      props["gi_z"] = panel.has_gi ? num_json(row->gi_z) : json(nullptr);
      props["significance"] = panel.has_gi ? json(significance_label(row->sig)) : json(nullptr);
    } else {
      const auto ex = std::find_if(panel.excluded.begin(), panel.excluded.end(),
                                   [&](const ExcludedCounty& e) { return e.fips == c.fips; });
      props["d"] = ex != panel.excluded.end() ? ex->d : 0;
      props["R"] = nullptr;
      props["residual"] = nullptr;
      props["gi_z"] = nullptr;
      props["significance"] = label_for(kInsufficientData);
    }
    features.push_back({{"type", "Feature"}, {"properties", std::move(props)}, {"geometry", polygon_geometry(c)}});
  }
  out << json{{"type", "FeatureCollection"}, {"features", std::move(features)}}.dump() << '\n';
}

void write_verb_panel_geojson(std::ostream& out, const VerbPanel& panel,
                              const CountyIndex& geometry) {
  json features = json::array();
  for (const auto& c : geometry.counties()) {
    json props = {{"fips", c.fips}, {"name", c.name}, {"lemma", panel.lemma}};
    const auto row = std::find_if(panel.rows.begin(), panel.rows.end(),
                                  [&](const VerbMapRow& r) { return r.fips == c.fips; });
    if (row != panel.rows.end()) {
      props["tokens"] = row->tokens;
      props["fraction"] = num_json(row->fraction);
      props["gi_z"] = num_json(row->gi_z);
      props["significance"] = significance_label(row->sig);
    } else {
      props["tokens"] = nullptr;
      props["fraction"] = nullptr;
      props["gi_z"] = nullptr;
      props["significance"] = label_for(kInsufficientData);
    }
    features.push_back({{"type", "Feature"}, {"properties", std::move(props)}, {"geometry", polygon_geometry(c)}});
  }
  out << json{{"type", "FeatureCollection"}, {"features", std::move(features)}}.dump() << '\n';
}

}  // namespace verbreg
