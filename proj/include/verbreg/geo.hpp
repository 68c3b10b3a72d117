#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "verbreg/ingest.hpp"

namespace verbreg {

// ---------------------------------------------------------------------------
// Gazetteer and fuzzy "city, state" matching

struct GazetteerEntry {
  std::string city;        // lowercase
  std::string state;       // lowercase two-letter code
  std::string state_full;  // lowercase
  double lat = 0.0;
  double lon = 0.0;
  std::string county_fips;
  std::uint64_t population = 0;
};

class Gazetteer {
 public:
  explicit Gazetteer(std::vector<GazetteerEntry> entries);

  const std::vector<GazetteerEntry>& entries() const noexcept { return entries_; }

  // Resolves an abbreviation or full state name (already case-folded) to the
  // two-letter code used in entries.
  std::optional<std::string> state_code(std::string_view state) const;

  // Indices into entries() for one state code.
  std::span<const std::size_t> in_state(std::string_view code) const;

 private:
  std::vector<GazetteerEntry> entries_;
  std::unordered_map<std::string, std::string> state_names_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_state_;
};

// CSV `city,state,state_full,lat,lon,county_fips,population`.
Gazetteer read_gazetteer(std::istream& in);
Gazetteer load_gazetteer(const std::filesystem::path& path);

// Splits on commas; succeeds only for exactly two nonempty trimmed tokens.
// Both tokens are case-folded and internal whitespace runs collapse to one space.
std::optional<std::pair<std::string, std::string>> parse_city_state(std::string_view location_text);

std::size_t levenshtein(std::string_view a, std::string_view b);

// round(100 * (1 - levenshtein / max(len))), rounding halves up; 100 for two
// empty strings.
int similarity_score(std::string_view a, std::string_view b);

struct FuzzyMatch {
  const GazetteerEntry* entry = nullptr;
  std::size_t index = 0;
  int score = 0;
};

// Best entry in the given state whose city score is >= threshold. Ties break
// by larger population, then city name, then lowest county fips.
std::optional<FuzzyMatch> fuzzy_match(const Gazetteer& gazetteer, std::string_view city,
                                      std::string_view state, int confidence_threshold);

// ---------------------------------------------------------------------------
// Geometry

using Ring = std::vector<GeoPoint>;

// First ring is the outer boundary, the rest are holes.
struct Polygon {
  std::vector<Ring> rings;
};

struct BoundingBox {
  double min_lat = 0, max_lat = 0, min_lon = 0, max_lon = 0;

  GeoPoint center() const { return {(min_lat + max_lat) / 2.0, (min_lon + max_lon) / 2.0}; }
  bool contains(double lat, double lon) const {
    return lat >= min_lat && lat <= max_lat && lon >= min_lon && lon <= max_lon;
  }
};

// Even-odd test that counts points on an edge as inside.
bool polygon_contains(const Polygon& polygon, double lat, double lon);

struct County {
  std::string fips;
  std::string name;
  BoundingBox bbox;
  GeoPoint bbox_center;
  std::vector<Polygon> polygons;
};

// Immutable set of counties sorted by fips, with a 1-degree grid for lookups.
class CountyIndex {
 public:
  explicit CountyIndex(std::vector<County> counties);

  const std::vector<County>& counties() const noexcept { return counties_; }
  const County* find(std::string_view fips) const;

  // Lowest fips among the counties whose polygon contains the point.
  std::optional<std::string> locate(double lat, double lon) const;

 private:
  static long cell_key(int lat_cell, int lon_cell) { return lat_cell * 1000L + lon_cell; }

  std::vector<County> counties_;
  std::unordered_map<std::string, std::size_t> by_fips_;
  std::unordered_map<long, std::vector<std::size_t>> grid_;
};

// GeoJSON FeatureCollection of Polygon/MultiPolygon features with a `fips`
// property (and optional `name`). Bounding-box centers are computed here.
CountyIndex read_counties(std::istream& in);
CountyIndex load_counties(const std::filesystem::path& path);

struct Region {
  std::string name;
  BoundingBox bbox;
  std::vector<Polygon> polygons;
};

class RegionSet {
 public:
  explicit RegionSet(std::vector<Region> regions);

  const std::vector<Region>& regions() const noexcept { return regions_; }
  std::optional<std::string> locate(double lat, double lon) const;

 private:
  std::vector<Region> regions_;
};

// GeoJSON FeatureCollection with a `name` property per feature.
RegionSet read_regions(std::istream& in);
RegionSet load_regions(const std::filesystem::path& path);

inline std::optional<std::string> latlon_to_county(const CountyIndex& counties, double lat,
                                                   double lon) {
  return counties.locate(lat, lon);
}

inline std::optional<std::string> point_in_region(const RegionSet& regions, double lat, double lon) {
  return regions.locate(lat, lon);
}

// ---------------------------------------------------------------------------
// Scope resolution

enum class ScopeMode { all, us_geo, uk_geo, county };

std::optional<ScopeMode> parse_scope_mode(std::string_view s);
const char* to_string(ScopeMode mode);

inline constexpr int kDefaultFuzzyConfidence = 91;

// Maps records to scopes. `all` yields "all"; us_geo/uk_geo test only the geo
// coordinates against the "US"/"UK" regions; county uses only user_location:
// parse, fuzzy match, then point-in-county on the matched place.
class ScopeResolver {
 public:
  ScopeResolver(ScopeMode mode, const RegionSet* regions, const Gazetteer* gazetteer,
                const CountyIndex* counties, int confidence_threshold = kDefaultFuzzyConfidence);

  std::optional<std::string> operator()(const Record& record) const;

  ScopeMode mode() const noexcept { return mode_; }

 private:
  ScopeMode mode_;
  const RegionSet* regions_;
  const Gazetteer* gazetteer_;
  const CountyIndex* counties_;
  int threshold_;
  // County of each gazetteer entry, resolved once at construction.
  std::vector<std::optional<std::string>> entry_county_;
};

std::optional<std::string> resolve_scope(const Record& record, const RegionSet* regions,
                                         const Gazetteer* gazetteer, const CountyIndex* counties,
                                         ScopeMode mode);

}  // namespace verbreg
