#include "verbreg/geo.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <regex>

#include "verbreg/csv.hpp"
#include "verbreg/error.hpp"

namespace verbreg {

using nlohmann::json;

namespace {

std::string collapse_spaces(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : csv::trim(s)) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  return out;
}

bool valid_fips(const std::string& s) {
  static const std::regex re("[0-9]{5}");
  return std::regex_match(s, re);
}

double parse_double(const std::string& s, const char* what) {
  std::size_t used = 0;
  double v = 0;
  try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size() || !std::isfinite(v))
      throw Error(ErrorKind::input, std::string("gazetteer: bad ") + what + " '" + s + "'");
    return v;
  }

  }  // namespace

  // ---------------------------------------------------------------------------
  // Gazetteer

  Gazetteer::Gazetteer(std::vector<GazetteerEntry> entries) : entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      if (!valid_fips(e.county_fips))
        throw Error(ErrorKind::input, "gazetteer: bad county fips '" + e.county_fips + "'");
      if (!(e.lat >= -90 && e.lat <= 90 && e.lon >= -180 && e.lon <= 180))
        throw Error(ErrorKind::input, "gazetteer: coordinates out of range for " + e.city);
      state_names_[e.state] = e.state;
      if (!e.state_full.empty()) state_names_[e.state_full] = e.state;
      by_state_[e.state].push_back(i);
    }
  }

  std::optional<std::string> Gazetteer::state_code(std::string_view state) const {
    const auto it = state_names_.find(std::string(state));
    if (it == state_names_.end()) return std::nullopt;
    return it->second;
  }

  std::span<const std::size_t> Gazetteer::in_state(std::string_view code) const {
    const auto it = by_state_.find(std::string(code));
    if (it == by_state_.end()) return {};
    return it->second;
  }

  Gazetteer read_gazetteer(std::istream& in) {
    std::string line;
    if (!csv::read_line(in, line)) throw Error(ErrorKind::input, "gazetteer: empty file");
    const auto header = csv::split_line(line);
    static const std::vector<std::string> expected{"city", "state", "state_full", "lat",
                                                   "lon",  "county_fips", "population"};
    std::vector<std::string> trimmed;
    for (const auto& h : header) trimmed.emplace_back(csv::trim(h));
    if (trimmed != expected) throw Error(ErrorKind::input, "gazetteer: unexpected header '" + line + "'");

    std::vector<GazetteerEntry> entries;
    while (csv::read_line(in, line)) {
      const auto cells = csv::split_line(line);
      if (cells.size() != 7) throw Error(ErrorKind::input, "gazetteer: bad row '" + line + "'");
      GazetteerEntry e;
      e.city = collapse_spaces(csv::to_lower(cells[0]));
      e.state = csv::to_lower(csv::trim(cells[1]));
      e.state_full = collapse_spaces(csv::to_lower(cells[2]));
      e.lat = parse_double(std::string(csv::trim(cells[3])), "lat");
      e.lon = parse_double(std::string(csv::trim(cells[4])), "lon");
      e.county_fips = std::string(csv::trim(cells[5]));
      const std::string pop(csv::trim(cells[6]));
      if (!pop.empty()) e.population = static_cast<std::uint64_t>(parse_double(pop, "population"));
      entries.push_back(std::move(e));
    }
    return Gazetteer(std::move(entries));
  }

  Gazetteer load_gazetteer(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::input, "cannot open gazetteer " + path.string());
    return read_gazetteer(in);
  }

  std::optional<std::pair<std::string, std::string>> parse_city_state(std::string_view text) {
    const auto comma = text.find(',');
    if (comma == std::string_view::npos) return std::nullopt;
    if (text.find(',', comma + 1) != std::string_view::npos) return std::nullopt;
    auto city = collapse_spaces(csv::to_lower(text.substr(0, comma)));
    auto state = collapse_spaces(csv::to_lower(text.substr(comma + 1)));
    if (city.empty() || state.empty()) return std::nullopt;
    return std::pair{std::move(city), std::move(state)};
  }

  std::size_t levenshtein(std::string_view a, std::string_view b) {
    if (a.size() < b.size()) std::swap(a, b);
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
      std::size_t diag = row[0];
      row[0] = i;
      for (std::size_t j = 1; j <= b.size(); ++j) {
        const std::size_t up = row[j];
        const std::size_t sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
        row[j] = std::min({up + 1, row[j - 1] + 1, sub});
        diag = up;
      }
    }
    return row[b.size()];
  }

  namespace {

  // Integer form of round(100 * (maxlen - dist) / maxlen), halves rounding up.
  int score_from_distance(std::size_t dist, std::size_t maxlen) {
    if (maxlen == 0) return 100;
    const std::size_t num = 200 * (maxlen - dist) + maxlen;
    return static_cast<int>(num / (2 * maxlen));
  }

  }  // namespace

  int similarity_score(std::string_view a, std::string_view b) {
    return score_from_distance(levenshtein(a, b), std::max(a.size(), b.size()));
  }

  std::optional<FuzzyMatch> fuzzy_match(const Gazetteer& gazetteer, std::string_view city,
                                        std::string_view state, int confidence_threshold) {
    const auto code = gazetteer.state_code(csv::to_lower(csv::trim(state)));
    if (!code) return std::nullopt;
    const std::string query = collapse_spaces(csv::to_lower(city));

    std::optional<FuzzyMatch> best;
    const auto better = [&](const GazetteerEntry& e, int score) {
      if (!best) return true;
      const auto& b = *best->entry;
      if (score != best->score) return score > best->score;
      if (e.population != b.population) return e.population > b.population;
      if (e.city != b.city) return e.city < b.city;
      return e.county_fips < b.county_fips;
    };

    for (const std::size_t idx : gazetteer.in_state(*code)) {
      const auto& e = gazetteer.entries()[idx];
      const std::size_t maxlen = std::max(query.size(), e.city.size());
      const std::size_t min_dist =
          query.size() > e.city.size() ? query.size() - e.city.size() : e.city.size() - query.size();
      const int bound = score_from_distance(min_dist, maxlen);
      if (bound < confidence_threshold || (best && bound < best->score)) continue;
      const int score = score_from_distance(levenshtein(query, e.city), maxlen);
      if (score < confidence_threshold) continue;
      if (better(e, score)) best = FuzzyMatch{&e, idx, score};
    }
    return best;
  }

  // ---------------------------------------------------------------------------
  // Geometry

  namespace {

  bool on_segment(const GeoPoint& a, const GeoPoint& b, double lat, double lon) {
    constexpr double eps = 1e-12;
    const double cross = (b.lon - a.lon) * (lat - a.lat) - (b.lat - a.lat) * (lon - a.lon);
    const double scale = std::max({std::abs(b.lon - a.lon), std::abs(b.lat - a.lat), 1.0});
    if (std::abs(cross) > eps * scale) return false;
    return lon >= std::min(a.lon, b.lon) - eps && lon <= std::max(a.lon, b.lon) + eps &&
           lat >= std::min(a.lat, b.lat) - eps && lat <= std::max(a.lat, b.lat) + eps;
  }

  // Tells whether the ring boundary passes through the point; otherwise sets `inside`.
  bool ring_test(const Ring& ring, double lat, double lon, bool& inside) {
    inside = false;
    const std::size_t n = ring.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const GeoPoint& a = ring[i];
      const GeoPoint& b = ring[j];
      if (on_segment(a, b, lat, lon)) return true;
      if ((a.lat > lat) != (b.lat > lat)) {
        const double x = a.lon + (lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
        if (lon < x) inside = !inside;
      }
    }
    return false;
  }

  BoundingBox bbox_of(const std::vector<Polygon>& polygons) {
    BoundingBox box{90, -90, 180, -180};
    for (const auto& poly : polygons)
      for (const auto& ring : poly.rings)
        for (const auto& p : ring) {
          box.min_lat = std::min(box.min_lat, p.lat);
          box.max_lat = std::max(box.max_lat, p.lat);
          box.min_lon = std::min(box.min_lon, p.lon);
          box.max_lon = std::max(box.max_lon, p.lon);
        }
    return box;
  }

  Ring parse_ring(const json& coords) {
    Ring ring;
    for (const auto& pt : coords) {
      if (!pt.is_array() || pt.size() < 2 || !pt[0].is_number() || !pt[1].is_number())
        throw Error(ErrorKind::input, "geojson: bad coordinate");
      ring.push_back({pt[1].get<double>(), pt[0].get<double>()});
    }
    if (ring.size() > 1 && ring.front().lat == ring.back().lat && ring.front().lon == ring.back().lon)
      ring.pop_back();
    if (ring.size() < 3) throw Error(ErrorKind::input, "geojson: ring with fewer than 3 vertices");
    return ring;
  }

  Polygon parse_polygon(const json& coords) {
    Polygon poly;
    for (const auto& ring : coords) poly.rings.push_back(parse_ring(ring));
    if (poly.rings.empty()) throw Error(ErrorKind::input, "geojson: empty polygon");
    return poly;
  }

  std::vector<Polygon> parse_geometry(const json& geometry) {
    if (!geometry.is_object()) throw Error(ErrorKind::input, "geojson: feature without geometry");
    const auto type = geometry.value("type", "");
    const auto& coords = geometry.at("coordinates");
    std::vector<Polygon> out;
    if (type == "Polygon") {
      out.push_back(parse_polygon(coords));
    } else if (type == "MultiPolygon") {
      for (const auto& p : coords) out.push_back(parse_polygon(p));
    } else {
      throw Error(ErrorKind::input, "geojson: unsupported geometry type '" + type + "'");
    }
    return out;
  }

  json parse_feature_collection(std::istream& in) {
    json doc;
  try {
      doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::input, std::string("geojson: ") + e.what());
  }
  if (doc.value("type", "") != "FeatureCollection" || !doc.contains("features"))
    throw Error(ErrorKind::input, "geojson: expected a FeatureCollection");
  return doc;
}

}  // namespace

bool polygon_contains(const Polygon& polygon, double lat, double lon) {
  bool inside_outer = false;
  if (ring_test(polygon.rings.front(), lat, lon, inside_outer)) return true;
  if (!inside_outer) return false;
  for (std::size_t h = 1; h < polygon.rings.size(); ++h) {
    bool inside_hole = false;
    if (ring_test(polygon.rings[h], lat, lon, inside_hole)) return true;
    if (inside_hole) return false;
  }
  return true;
}

CountyIndex::CountyIndex(std::vector<County> counties) : counties_(std::move(counties)) {
  std::sort(counties_.begin(), counties_.end(),
            [](const County& a, const County& b) { return a.fips < b.fips; });
  for (std::size_t i = 0; i < counties_.size(); ++i) {
    auto& c = counties_[i];
    if (!valid_fips(c.fips)) throw Error(ErrorKind::input, "counties: bad fips '" + c.fips + "'");
    if (!by_fips_.emplace(c.fips, i).second)
      throw Error(ErrorKind::input, "counties: duplicate fips " + c.fips);
    if (!c.polygons.empty()) {
      c.bbox = bbox_of(c.polygons);
      c.bbox_center = c.bbox.center();
    }
    const int lat0 = static_cast<int>(std::floor(c.bbox.min_lat));
    const int lat1 = static_cast<int>(std::floor(c.bbox.max_lat));
    const int lon0 = static_cast<int>(std::floor(c.bbox.min_lon));
    const int lon1 = static_cast<int>(std::floor(c.bbox.max_lon));
    for (int la = lat0; la <= lat1; ++la)
      for (int lo = lon0; lo <= lon1; ++lo) grid_[cell_key(la, lo)].push_back(i);
  }
}

const County* CountyIndex::find(std::string_view fips) const {
  const auto it = by_fips_.find(std::string(fips));
  return it == by_fips_.end() ? nullptr : &counties_[it->second];
}

std::optional<std::string> CountyIndex::locate(double lat, double lon) const {
  // A point on a cell edge may belong to a county registered only in the
  // neighbouring cell, so probe every cell the point touches.
  std::vector<std::size_t> candidates;
  const double flat = std::floor(lat), flon = std::floor(lon);
  for (int dla = (lat == flat ? -1 : 0); dla <= 0; ++dla)
    for (int dlo = (lon == flon ? -1 : 0); dlo <= 0; ++dlo) {
      const auto it = grid_.find(cell_key(static_cast<int>(flat) + dla, static_cast<int>(flon) + dlo));
      if (it != grid_.end()) candidates.insert(candidates.end(), it->second.begin(), it->second.end());
    }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  // Candidates are in fips order, so the first container has the lowest fips.
  for (const std::size_t i : candidates) {
    const auto& c = counties_[i];
    if (!c.bbox.contains(lat, lon)) continue;
    for (const auto& poly : c.polygons)
      if (polygon_contains(poly, lat, lon)) return c.fips;
  }
  return std::nullopt;
}

CountyIndex read_counties(std::istream& in) {
  const json doc = parse_feature_collection(in);
  std::vector<County> counties;
  try {
    for (const auto& f : doc.at("features")) {
      const auto& props = f.at("properties");
      County c;
      const auto& fips = props.at("fips");
      if (fips.is_string()) {
        c.fips = fips.get<std::string>();
      } else if (fips.is_number_integer()) {
        c.fips = std::to_string(fips.get<long>());
        if (c.fips.size() < 5) c.fips.insert(0, 5 - c.fips.size(), '0');
      } else {
        throw Error(ErrorKind::input, "counties: fips property must be a string or integer");
      }
      if (props.contains("name") && props["name"].is_string()) c.name = props["name"].get<std::string>();
      c.polygons = parse_geometry(f.at("geometry"));
      counties.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::input, std::string("counties: ") + e.what());
  }
  return CountyIndex(std::move(counties));
}

CountyIndex load_counties(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::input, "cannot open county geometry " + path.string());
  return read_counties(in);
}

RegionSet::RegionSet(std::vector<Region> regions) : regions_(std::move(regions)) {
  std::sort(regions_.begin(), regions_.end(),
            [](const Region& a, const Region& b) { return a.name < b.name; });
  for (auto& r : regions_) r.bbox = bbox_of(r.polygons);
}

std::optional<std::string> RegionSet::locate(double lat, double lon) const {
  for (const auto& r : regions_) {
    if (!r.bbox.contains(lat, lon)) continue;
    for (const auto& poly : r.polygons)
      if (polygon_contains(poly, lat, lon)) return r.name;
  }
  return std::nullopt;
}

RegionSet read_regions(std::istream& in) {
  const json doc = parse_feature_collection(in);
  std::vector<Region> regions;
  try {
    for (const auto& f : doc.at("features")) {
      Region r;
      r.name = f.at("properties").at("name").get<std::string>();
      r.polygons = parse_geometry(f.at("geometry"));
      regions.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::input, std::string("regions: ") + e.what());
  }
  return RegionSet(std::move(regions));
}

RegionSet load_regions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::input, "cannot open regions " + path.string());
  return read_regions(in);
}

// ---------------------------------------------------------------------------
// Scope resolution

std::optional<ScopeMode> parse_scope_mode(std::string_view s) {
  if (s == "all") return ScopeMode::all;
  if (s == "us_geo") return ScopeMode::us_geo;
  if (s == "uk_geo") return ScopeMode::uk_geo;
  if (s == "county") return ScopeMode::county;
  return std::nullopt;
}

const char* to_string(ScopeMode mode) {
  switch (mode) {
    case ScopeMode::all: return "all";
    case ScopeMode::us_geo: return "us_geo";
    case ScopeMode::uk_geo: return "uk_geo";
    case ScopeMode::county: return "county";
  }
  return "?";
}

ScopeResolver::ScopeResolver(ScopeMode mode, const RegionSet* regions, const Gazetteer* gazetteer,
                             const CountyIndex* counties, int confidence_threshold)
    : mode_(mode),
      regions_(regions),
      gazetteer_(gazetteer),
      counties_(counties),
      threshold_(confidence_threshold) {
  if (confidence_threshold < 0 || confidence_threshold > 100)
    throw Error(ErrorKind::config, "fuzzy confidence must be in [0, 100]");
  if ((mode == ScopeMode::us_geo || mode == ScopeMode::uk_geo) && regions == nullptr)
    throw Error(ErrorKind::config, std::string("mode ") + to_string(mode) + " requires regions");
  if (mode == ScopeMode::county) {
    if (gazetteer == nullptr || counties == nullptr)
      throw Error(ErrorKind::config, "mode county requires a gazetteer and county geometry");
    entry_county_.reserve(gazetteer->entries().size());
    for (const auto& e : gazetteer->entries()) {
      auto fips = counties->locate(e.lat, e.lon);
      // Generalized coastlines can leave a place point just outside every
      // polygon; fall back to the gazetteer's own county when it is known.
      if (!fips && counties->find(e.county_fips) != nullptr) fips = e.county_fips;
      entry_county_.push_back(std::move(fips));
    }
  }
}

std::optional<std::string> ScopeResolver::operator()(const Record& record) const {
  switch (mode_) {
    case ScopeMode::all:
      return std::string("all");
    case ScopeMode::us_geo:
    case ScopeMode::uk_geo: {
      if (!record.geo) return std::nullopt;
      const auto region = regions_->locate(record.geo->lat, record.geo->lon);
      const char* want = mode_ == ScopeMode::us_geo ? "US" : "UK";
      if (region && *region == want) return *region;
      return std::nullopt;
    }
    case ScopeMode::county: {
      if (!record.user_location) return std::nullopt;
      const auto parsed = parse_city_state(*record.user_location);
      if (!parsed) return std::nullopt;
      const auto match = fuzzy_match(*gazetteer_, parsed->first, parsed->second, threshold_);
      if (!match) return std::nullopt;
      return entry_county_[match->index];
    }
  }
  return std::nullopt;
}

std::optional<std::string> resolve_scope(const Record& record, const RegionSet* regions,
                                         const Gazetteer* gazetteer, const CountyIndex* counties,
                                         ScopeMode mode) {
  return ScopeResolver(mode, regions, gazetteer, counties)(record);
}

}  // namespace verbreg
