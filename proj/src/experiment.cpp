#include "verbreg/experiment.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <boost/random/binomial_distribution.hpp>
#include <boost/random/mersenne_twister.hpp>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>

#include "verbreg/csv.hpp"
#include "verbreg/error.hpp"
#include "verbreg/parallel.hpp"

namespace verbreg {

// ---------------------------------------------------------------------------
// Sampling simulation

TokenPool build_pool(std::span<const PastTenseCounts> counts) {
  if (counts.empty()) throw Error(ErrorKind::precondition, "token pool: no counts");
  TokenPool pool;
  pool.per_lemma.resize(counts.front().per_lemma.size());
  for (const auto& c : counts) {
    if (c.per_lemma.size() != pool.per_lemma.size())
      throw Error(ErrorKind::precondition, "token pool: counts over different lexicons");
    for (std::size_t i = 0; i < c.per_lemma.size(); ++i) {
      pool.per_lemma[i].regular += c.per_lemma[i].regular;
      pool.per_lemma[i].irregular += c.per_lemma[i].irregular;
    }
  }
  for (const auto& v : pool.per_lemma) pool.total_tokens += v.total();
  if (pool.total_tokens == 0) throw Error(ErrorKind::precondition, "token pool: all counts are zero");
  return pool;
}

TokenPool build_pool(const ScopeMap& scopes) {
  std::vector<PastTenseCounts> all;
  all.reserve(scopes.size());
  for (const auto& [_, c] : scopes) all.push_back(c);
  return build_pool(all);
}

std::vector<std::uint64_t> log_spaced_sizes(std::size_t count, double lo, double hi) {
  if (count == 0 || !(lo >= 1.0) || !(hi >= lo))
    throw Error(ErrorKind::precondition, "log-spaced sizes need count >= 1 and 1 <= lo <= hi");
  std::vector<std::uint64_t> sizes(count);
  const double a = std::log10(lo), b = std::log10(hi);
  for (std::size_t i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
    sizes[i] = static_cast<std::uint64_t>(std::llround(std::pow(10.0, a + t * (b - a))));
  }
  return sizes;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t size_index, std::uint64_t replicate) {
  return splitmix64(splitmix64(splitmix64(seed) ^ size_index) ^ replicate);
}

std::vector<SyntheticCounty> sample_synthetic(const TokenPool& pool,
                                              std::span<const std::uint64_t> sizes,
                                              const SynthOptions& options) {
  if (pool.total_tokens == 0) throw Error(ErrorKind::precondition, "synthetic sampling: empty pool");
  for (const auto s : sizes)
    if (s < 1) throw Error(ErrorKind::precondition, "synthetic sampling: sizes must be >= 1");

  // Flattened cells: 2 * lemma + (0 regular, 1 irregular).
  std::vector<std::uint64_t> cells;
  cells.reserve(pool.per_lemma.size() * 2);
  for (const auto& v : pool.per_lemma) {
    cells.push_back(v.regular);
    cells.push_back(v.irregular);
  }
  // suffix[k] = sum of cells[k..]
  std::vector<std::uint64_t> suffix(cells.size() + 1, 0);
  for (std::size_t k = cells.size(); k-- > 0;) suffix[k] = suffix[k + 1] + cells[k];

  const std::size_t replicates = options.replicates;
  std::vector<SyntheticCounty> out(sizes.size() * replicates);
  parallel_for(out.size(), options.workers, [&](std::size_t task) {
    const std::size_t size_index = task / replicates;
    const std::size_t replicate = task % replicates;
    boost::random::mt19937_64 rng(derive_seed(options.seed, size_index, replicate));

    SyntheticCounty& county = out[task];
    county.target_size = sizes[size_index];
    county.size_index = size_index;
    county.replicate = replicate;
    county.drawn.assign(pool.per_lemma.size(), {});

    std::int64_t remaining = static_cast<std::int64_t>(county.target_size);
    for (std::size_t k = 0; k < cells.size() && remaining > 0; ++k) {
      if (cells[k] == 0) continue;
      std::int64_t x = remaining;
      if (cells[k] < suffix[k]) {
        const double p = static_cast<double>(cells[k]) / static_cast<double>(suffix[k]);
        boost::random::binomial_distribution<std::int64_t, double> draw(remaining, p);
        x = draw(rng);
      }
      auto& v = county.drawn[k / 2];
      (k % 2 == 0 ? v.regular : v.irregular) = static_cast<std::uint64_t>(x);
      remaining -= x;
    }
    county.average_fraction = average_fraction(county.drawn);
    if (!options.keep_counts) {
      county.drawn.clear();
      county.drawn.shrink_to_fit();
    }
  });
  return out;
}

void write_synthetic_csv(std::ostream& out, const std::vector<SyntheticCounty>& counties) {
  out << "size,replicate,avg_fraction\n";
  for (const auto& c : counties)
    out << c.target_size << ',' << c.replicate << ','
        << (c.average_fraction ? fmt::format("{}", *c.average_fraction) : std::string()) << '\n';
}

// ---------------------------------------------------------------------------
// Demographic correlations

const char* to_string(VariableKind kind) {
  return kind == VariableKind::estimate ? "Estimate" : "Percent";
}

namespace {

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

std::optional<double> parse_cell(std::string_view cell) {
  const std::string s(csv::trim(cell));
  if (s.empty()) return std::nullopt;
  std::size_t used = 0;
  try {
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::optional<std::string> normalize_fips(std::string_view cell) {
  const auto s = csv::trim(cell);
  if (s.empty() || s.size() > 5) return std::nullopt;
  for (char c : s)
    if (c < '0' || c > '9') return std::nullopt;
  std::string out(s);
  out.insert(0, 5 - out.size(), '0');
  return out;
}

}  // namespace

std::vector<DemographicVariable> read_acs_csv(std::istream& in, const std::string& fips_column) {
  std::string line;
  if (!csv::read_line(in, line)) throw Error(ErrorKind::input, "acs: empty file");
  auto header = csv::split_line(line);
  const auto fcol = std::find_if(header.begin(), header.end(),
                                 [&](const std::string& h) { return csv::trim(h) == fips_column; });
  if (fcol == header.end()) throw Error(ErrorKind::input, "acs: no '" + fips_column + "' column");
  const std::size_t fips_idx = static_cast<std::size_t>(fcol - header.begin());

  std::vector<std::vector<std::string>> rows;
  while (csv::read_line(in, line)) {
    auto cells = csv::split_line(line);
    if (cells.size() != header.size())
      throw Error(ErrorKind::input, "acs: row has " + std::to_string(cells.size()) +
                                        " columns, header has " + std::to_string(header.size()));
    rows.push_back(std::move(cells));
  }
  if (!rows.empty() && !normalize_fips(rows.front()[fips_idx])) {
    header = std::move(rows.front());
    rows.erase(rows.begin());
  }

  std::vector<DemographicVariable> vars;
  std::vector<std::size_t> columns;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto name = csv::trim(header[c]);
    DemographicVariable v;
    if (starts_with(name, "Estimate;"))
      v.kind = VariableKind::estimate;
    else if (starts_with(name, "Percent;"))
      v.kind = VariableKind::percent;
    else
      continue;
    v.id = std::string(name);
    vars.push_back(std::move(v));
    columns.push_back(c);
  }

  for (const auto& cells : rows) {
    const auto fips = normalize_fips(cells[fips_idx]);
    if (!fips) throw Error(ErrorKind::input, "acs: bad fips '" + cells[fips_idx] + "'");
    for (std::size_t k = 0; k < columns.size(); ++k)
      if (const auto v = parse_cell(cells[columns[k]])) vars[k].values[*fips] = *v;
  }
  return vars;
}

std::vector<DemographicVariable> load_acs_csv(const std::filesystem::path& path,
                                              const std::string& fips_column) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::input, "cannot open " + path.string());
  return read_acs_csv(in, fips_column);
}

DemographicResiduals residualize_demographic(const DemographicVariable& variable,
                                             const std::map<std::string, double>& volume) {
  DemographicResiduals out;
  std::vector<double> d;
  for (const auto& [fips, D] : variable.values) {
    const auto it = volume.find(fips);
    if (it == volume.end()) continue;
    double x = D;
    if (variable.kind == VariableKind::estimate) {
      if (!(D > 0.0)) continue;
      x = std::log10(D);
    }
    out.fips.push_back(fips);
    out.transformed.push_back(x);
    d.push_back(it->second);
  }
  if (out.fips.size() < 3)
    throw Error(ErrorKind::precondition, "fewer than 3 usable counties for '" + variable.id + "'");
  out.fit = fit_log_volume(d, out.transformed);

  out.residuals.resize(d.size());
  double scale = 0.0;
  for (double x : out.transformed) scale = std::max(scale, std::abs(x));
  double max_residual = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    out.residuals[i] = residualize(out.fit, d[i], out.transformed[i]);
    max_residual = std::max(max_residual, std::abs(out.residuals[i]));
  }
  if (max_residual <= 1e-9 * std::max(scale, 1e-300))
    std::fill(out.residuals.begin(), out.residuals.end(), 0.0);
  return out;
}

CorrelationResult partial_correlation(std::span<const double> r_reg, std::span<const double> r_dem) {
  return pearson(r_reg, r_dem);
}

namespace {

VariableCorrelation correlate_one(const DemographicVariable& variable, const CountyPanel& panel) {
  VariableCorrelation vc;
  vc.id = variable.id;
  vc.kind = variable.kind;
  try {
    std::map<std::string, double> volume;
    std::map<std::string, double> regularization;
    for (const auto& row : panel.rows) {
      volume[row.fips] = static_cast<double>(row.d);
      regularization[row.fips] = row.R;
    }
    const auto dem = residualize_demographic(variable, volume);
    vc.n = dem.fips.size();

    std::vector<double> d, R, raw;
    for (const auto& f : dem.fips) {
      d.push_back(volume.at(f));
      R.push_back(regularization.at(f));
      raw.push_back(variable.values.at(f));
    }
    vc.simple_r = pearson(dem.transformed, R).r;
    if (variable.kind == VariableKind::estimate) vc.simple_r_raw = pearson(raw, R).r;

    const auto fit = fit_log_volume(d, R);
    std::vector<double> r_reg(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) r_reg[i] = residualize(fit, d[i], R[i]);
    const auto partial = partial_correlation(r_reg, dem.residuals);
    vc.partial_r = partial.r;
    vc.partial_p = partial.p_value;
  } catch (const Error& e) {
    vc.failure = std::string(to_string(e.kind())) + ": " + e.what();
    vc.partial_r.reset();
    vc.partial_p.reset();
  }
  return vc;
}

}  // namespace

std::vector<VariableCorrelation> rank_variables(std::span<const DemographicVariable> variables,
                                                const CountyPanel& panel, std::size_t workers) {
  std::vector<VariableCorrelation> out(variables.size());
  parallel_for(variables.size(), workers,
               [&](std::size_t i) { out[i] = correlate_one(variables[i], panel); });
  std::stable_sort(out.begin(), out.end(), [](const VariableCorrelation& a, const VariableCorrelation& b) {
    const bool ra = a.failure.empty(), rb = b.failure.empty();
    if (ra != rb) return ra;
    if (ra) {
      const double ma = std::abs(*a.partial_r), mb = std::abs(*b.partial_r);
      if (ma != mb) return ma > mb;
    }
    return a.id < b.id;
  });
  return out;
}

void write_partials_csv(std::ostream& out, const std::vector<VariableCorrelation>& ranked) {
  const auto opt = [](const std::optional<double>& v) {
    return v ? fmt::format("{}", *v) : std::string();
  };
  out << "variable,kind,simple_r,partial_r,n,simple_r_raw,status\n";
  for (const auto& v : ranked)
    out << csv::quote(v.id) << ',' << to_string(v.kind) << ',' << opt(v.simple_r) << ','
        << opt(v.partial_r) << ',' << v.n << ',' << opt(v.simple_r_raw) << ','
        << csv::quote(v.failure.empty() ? "ok" : v.failure) << '\n';
}

}  // namespace verbreg
