#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "verbreg/geo.hpp"
#include "verbreg/ingest.hpp"
#include "verbreg/lexicon.hpp"

namespace testing {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(VERBREG_FIXTURES) / name;
}

inline const verbreg::Lexicon& shipped_lexicon() {
  static const verbreg::Lexicon lex = verbreg::load_lexicon(verbreg::default_lexicon_path());
  return lex;
}

// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("verbreg_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

// Great-circle distance from the chord between unit vectors, floored at 10 miles.
inline double chord_miles(const verbreg::GeoPoint& a, const verbreg::GeoPoint& b) {
  const long double k = 3.14159265358979323846264338327950288L / 180.0L;
  const auto unit = [&](const verbreg::GeoPoint& p) {
    const long double la = p.lat * k, lo = p.lon * k;
    return std::array<long double, 3>{std::cos(la) * std::cos(lo), std::cos(la) * std::sin(lo),
                                      std::sin(la)};
  };
  const auto u = unit(a), v = unit(b);
  long double c2 = 0;
  for (int i = 0; i < 3; ++i) c2 += (u[i] - v[i]) * (u[i] - v[i]);
  const long double d = 3958.7613L * 2.0L * std::asin(std::min(1.0L, std::sqrt(c2) / 2.0L));
  return static_cast<double>(std::max(d, 10.0L));
}

// Getis-Ord Gi* evaluated term by term in long double, j = i included.
inline std::vector<double> gi_star_oracle(const std::vector<double>& x,
                                          const std::vector<verbreg::GeoPoint>& centers) {
  const std::size_t n = x.size();
  long double mean = 0, sq = 0;
  for (double v : x) {
    mean += v;
    sq += static_cast<long double>(v) * v;
  }
  mean /= n;
  const long double s = std::sqrt(sq / n - mean * mean);
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    long double wx = 0, w = 0, w2 = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const long double wij = 1.0L / std::sqrt(static_cast<long double>(chord_miles(centers[i], centers[j])));
      wx += wij * x[j];
      w += wij;
      w2 += wij * wij;
    }
    const long double den = s * std::sqrt((n * w2 - w * w) / (n - 1));
    z[i] = static_cast<double>((wx - mean * w) / den);
  }
  return z;
}

// Two-sided signed-rank p by enumerating all 2^n sign patterns.
inline double wilcoxon_brute_force(const std::vector<double>& diffs) {
  std::vector<double> d;
  for (double v : diffs)
    if (v != 0.0) d.push_back(v);
  const std::size_t n = d.size();
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n; ++i) {
    double below = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(d[j]) < std::abs(d[i])) ++below;
      else if (std::abs(d[j]) == std::abs(d[i])) ++equal;
    }
    ranks[i] = below + (equal + 1) / 2.0;
  }
  double observed = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (d[i] > 0) observed += ranks[i];
  std::uint64_t le = 0, ge = 0;
  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    double w = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1) w += ranks[i];
    if (w <= observed + 1e-9) ++le;
    if (w >= observed - 1e-9) ++ge;
  }
  const double p = 2.0 * static_cast<double>(std::min(le, ge)) / static_cast<double>(total);
  return std::min(1.0, p);
}

// Counts for one scope with the given (lemma, regular, irregular) triples.
inline verbreg::PastTenseCounts make_counts(
    const std::string& scope, const std::vector<std::tuple<std::string, std::uint64_t, std::uint64_t>>& cells,
    const verbreg::Lexicon& lex = shipped_lexicon()) {
  verbreg::PastTenseCounts c(scope, lex.size());
  for (const auto& [lemma, reg, irr] : cells) {
    const auto idx = lex.index_of(lemma);
    if (!idx) throw std::runtime_error("unknown lemma " + lemma);
    c.per_lemma[*idx].regular += reg;
    c.per_lemma[*idx].irregular += irr;
  }
  return c;
}

}  // namespace testing
