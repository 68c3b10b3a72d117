#include "verbreg/stats.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <istream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <ostream>

#include "verbreg/csv.hpp"
#include "verbreg/error.hpp"

namespace verbreg {

using nlohmann::json;

double regularization_fraction(double regular, double irregular) {
  if (!(regular >= 0.0) || !(irregular >= 0.0))
    throw Error(ErrorKind::precondition, "regularization fraction needs nonnegative weights");
  const double total = regular + irregular;
  if (total <= 0.0) throw Error(ErrorKind::precondition, "regularization fraction of zero total");
  return regular / total;
}

FormClass classify(double fraction) {
  return fraction > 0.5 ? FormClass::regular : FormClass::irregular;
}

const VerbFraction* RegularizationTable::find(std::string_view lemma) const {
  for (const auto& r : rows)
    if (r.lemma == lemma) return &r;
  return nullptr;
}

namespace {

void finish_average(RegularizationTable& t) {
  if (t.rows.empty()) {
    t.average.reset();
    return;
  }
  double sum = 0.0;
  for (const auto& r : t.rows) sum += r.fraction;
  t.average = sum / static_cast<double>(t.rows.size());
}

}  // namespace

std::optional<double> average_fraction(std::span<const VerbCounts> counts) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& c : counts) {
    if (c.total() == 0) continue;
    sum += static_cast<double>(c.regular) / static_cast<double>(c.total());
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

RegularizationTable build_table(const ScopeWeights& weights, const Lexicon& lexicon,
                                const VerbFilter& filter) {
  if (weights.per_lemma.size() != lexicon.size())
    throw Error(ErrorKind::precondition, "weights do not match the lexicon");
  RegularizationTable t;
  t.scope_id = weights.scope_id;
  for (std::size_t i = 0; i < lexicon.size(); ++i) {
    const auto& e = lexicon[i];
    if (filter && !filter(e)) continue;
    const auto& w = weights.per_lemma[i];
    if (w.regular + w.irregular <= 0.0) continue;
    t.rows.push_back({e.lemma, w.regular, w.irregular, regularization_fraction(w.regular, w.irregular)});
  }
  finish_average(t);
  return t;
}

RegularizationTable build_table(const PastTenseCounts& counts, const Lexicon& lexicon,
                                const VerbFilter& filter) {
  return build_table(to_weights(counts), lexicon, filter);
}

void write_table_csv(std::ostream& out, const RegularizationTable& table) {
  out << "lemma,regular,irregular,fraction\n";
  for (const auto& r : table.rows)
    out << fmt::format("{},{},{},{}\n", r.lemma, r.regular, r.irregular, r.fraction);
}

RegularizationTable read_table_csv(std::istream& in, std::string scope_id) {
  const auto fail = [](const std::string& m) -> void { throw Error(ErrorKind::input, "table csv: " + m); };
  RegularizationTable t;
  t.scope_id = std::move(scope_id);
  std::string line;
  if (!csv::read_line(in, line)) fail("empty file");
  if (csv::trim(line) != "lemma,regular,irregular,fraction") fail("unexpected header '" + line + "'");
  while (csv::read_line(in, line)) {
    const auto cells = csv::split_line(line);
    if (cells.size() != 4) fail("bad row '" + line + "'");
    VerbFraction r;
    r.lemma = std::string(csv::trim(cells[0]));
    try {
      r.regular = std::stod(cells[1]);
      r.irregular = std::stod(cells[2]);
    } catch (const std::exception&) {
      fail("bad number in '" + line + "'");
    }
    if (t.find(r.lemma) != nullptr) fail("duplicate lemma " + r.lemma);
    // The fraction column is informational; recompute it from the weights.
    try {
      r.fraction = regularization_fraction(r.regular, r.irregular);
    } catch (const Error&) {
      fail("row with invalid weights '" + line + "'");
    }
    t.rows.push_back(std::move(r));
  }
  finish_average(t);
  return t;
}

std::string table_to_json(const RegularizationTable& table) {
  json j;
  j["scope"] = table.scope_id;
  j["verb_count"] = table.verb_count();
  j["average"] = table.average ? json(*table.average) : json(nullptr);
  json rows = json::array();
  for (const auto& r : table.rows)
    rows.push_back({{"lemma", r.lemma},
                    {"regular", r.regular},
                    {"irregular", r.irregular},
                    {"fraction", r.fraction},
                    {"class", to_string(classify(r.fraction))}});
  j["verbs"] = std::move(rows);
  return j.dump(2);
}

// ---------------------------------------------------------------------------

DifferenceTable difference_table(const RegularizationTable& a, const RegularizationTable& b) {
  DifferenceTable d;
  double sum = 0.0;
  for (const auto& ra : a.rows) {
    const auto* rb = b.find(ra.lemma);
    if (rb == nullptr) continue;
    d.rows.push_back({ra.lemma, ra.fraction, rb->fraction, ra.fraction - rb->fraction});
    sum += ra.fraction - rb->fraction;
  }
  if (d.rows.empty()) throw Error(ErrorKind::precondition, "tables share no lemmas");
  d.average = sum / static_cast<double>(d.rows.size());
  return d;
}

void write_difference_csv(std::ostream& out, const DifferenceTable& table) {
  out << "lemma,a,b,difference\n";
  for (const auto& r : table.rows) out << fmt::format("{},{},{},{}\n", r.lemma, r.a, r.b, r.difference);
}

// ---------------------------------------------------------------------------

std::vector<double> fractional_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double mean_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

PairedTestResult wilcoxon_signed_rank(std::span<const std::pair<double, double>> pairs) {
  PairedTestResult res;
  res.n_pairs = pairs.size();
  std::vector<double> diffs;
  for (const auto& [x, y] : pairs) {
    if (!std::isfinite(x) || !std::isfinite(y))
      throw Error(ErrorKind::precondition, "wilcoxon: non-finite value");
    if (x > y) ++res.n_greater_first;
    if (y > x) ++res.n_greater_second;
    if (x != y) diffs.push_back(x - y);
  }
  if (diffs.empty()) throw Error(ErrorKind::degenerate, "wilcoxon: all differences are zero");

  const std::size_t n = diffs.size();
  res.n_effective = n;
  std::vector<double> magnitudes(n);
  for (std::size_t i = 0; i < n; ++i) magnitudes[i] = std::abs(diffs[i]);
  const auto ranks = fractional_ranks(magnitudes);

  double w_plus = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (diffs[i] > 0) w_plus += ranks[i];
  res.statistic = w_plus;

  if (n <= kWilcoxonExactMaxN) {
    res.method = PValueMethod::exact;
    // Mean ranks are multiples of 1/2, so doubled ranks are integers and the
    // sign-flip distribution of 2W+ can be counted by subset-sum DP.
    std::vector<std::size_t> doubled(n);
    std::size_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      doubled[i] = static_cast<std::size_t>(std::llround(2.0 * ranks[i]));
      total += doubled[i];
    }
    std::vector<double> ways(total + 1, 0.0);
    ways[0] = 1.0;
    std::size_t reach = 0;
    for (const std::size_t r : doubled) {
      for (std::size_t s = reach + 1; s-- > 0;)
        if (ways[s] != 0.0) ways[s + r] += ways[s];
      reach += r;
    }
    const auto observed = static_cast<std::size_t>(std::llround(2.0 * w_plus));
    double lower = 0.0, upper = 0.0;
    for (std::size_t s = 0; s <= total; ++s) {
      if (s <= observed) lower += ways[s];
      if (s >= observed) upper += ways[s];
    }
    const double all = std::ldexp(1.0, static_cast<int>(n));
    res.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / all);
  } else {
    res.method = PValueMethod::normal;
    const double nd = static_cast<double>(n);
    const double mean = nd * (nd + 1.0) / 4.0;
    double tie_term = 0.0;
    std::vector<double> sorted = magnitudes;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j < n && sorted[j] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i);
      tie_term += t * t * t - t;
      i = j;
    }
    const double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term / 48.0;
    const double z = std::max(0.0, std::abs(w_plus - mean) - 0.5) / std::sqrt(var);
    res.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  }
  return res;
}

std::string to_json(const PairedTestResult& r) {
  json j;
  j["n_pairs"] = r.n_pairs;
  j["n_effective"] = r.n_effective;
  j["statistic"] = r.statistic;
  j["p_value"] = r.p_value;
  j["n_greater_first"] = r.n_greater_first;
  j["n_greater_second"] = r.n_greater_second;
  j["method"] = r.method == PValueMethod::exact ? "exact" : "normal";
  return j.dump(2);
}

double correlation_p_value(double r, std::size_t n) {
  if (n < 3) throw Error(ErrorKind::precondition, "correlation p-value needs n >= 3");
  const double df = static_cast<double>(n) - 2.0;
  const double r2 = r * r;
  if (r2 >= 1.0) return 0.0;
  const double t = std::abs(r) * std::sqrt(df / (1.0 - r2));
  const boost::math::students_t dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, t)));
}

namespace {

void check_correlation_input(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::precondition, "correlation: length mismatch");
  if (x.size() < 3) throw Error(ErrorKind::precondition, "correlation: need at least 3 points");
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i]) || !std::isfinite(y[i]))
      throw Error(ErrorKind::precondition, "correlation: non-finite value");
}

}  // namespace

CorrelationResult pearson(std::span<const double> x, std::span<const double> y) {
  check_correlation_input(x, y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  const bool x_const = std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; });
  const bool y_const = std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
  if (x_const || y_const || sxx <= 0.0 || syy <= 0.0)
    throw Error(ErrorKind::degenerate, "correlation: constant input vector");
  CorrelationResult res;
  res.n = x.size();
  res.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  res.p_value = correlation_p_value(res.r, res.n);
  return res;
}

CorrelationResult spearman(std::span<const double> x, std::span<const double> y) {
  check_correlation_input(x, y);
  const auto rx = fractional_ranks(x);
  const auto ry = fractional_ranks(y);
  return pearson(rx, ry);
}

// ---------------------------------------------------------------------------

const char* to_string(FrequencyBand band) {
  switch (band) {
    case FrequencyBand::high: return "high";
    case FrequencyBand::mid: return "mid";
    case FrequencyBand::low: return "low";
  }
  return "?";
}

std::vector<FrequencyBin> bin_verbs(const PastTenseCounts& pool_counts, const Lexicon& lexicon) {
  if (pool_counts.per_lemma.size() != lexicon.size())
    throw Error(ErrorKind::precondition, "pool counts do not match the lexicon");
  std::vector<FrequencyBin> bins{
      {FrequencyBand::high, 1'000'000, 100'000'000, {}},
      {FrequencyBand::mid, 10'000, 1'000'000, {}},
      {FrequencyBand::low, 100, 10'000, {}},
  };
  for (std::size_t i = 0; i < lexicon.size(); ++i) {
    const std::uint64_t t = pool_counts.per_lemma[i].total();
    if (t >= bins[0].lower && t <= bins[0].upper)
      bins[0].lemmas.push_back(lexicon[i].lemma);
    else if (t >= bins[1].lower && t < bins[1].upper)
      bins[1].lemmas.push_back(lexicon[i].lemma);
    else if (t >= bins[2].lower && t < bins[2].upper)
      bins[2].lemmas.push_back(lexicon[i].lemma);
  }
  return bins;
}

}  // namespace verbreg
