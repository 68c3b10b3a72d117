#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "support.hpp"
#include "verbreg/error.hpp"
#include "verbreg/experiment.hpp"
#include "verbreg/stats.hpp"

using namespace verbreg;

namespace {

TokenPool pool_of(const std::vector<std::tuple<std::string, std::uint64_t, std::uint64_t>>& cells) {
  std::vector<PastTenseCounts> one{testing::make_counts("pool", cells)};
  return build_pool(one);
}

CountyRow row(const std::string& fips, std::uint64_t d, double R) {
  CountyRow r;
  r.fips = fips;
  r.d = d;
  r.R = R;
  return r;
}

std::string fips_of(std::size_t i) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%05zu", 1000 + i);
  return buf;
}

}  // namespace

TEST_CASE("pools sum scopes componentwise") {
  CHECK(pool_of({{"burn", 1, 1}}).total_tokens == 2);
  ScopeMap scopes;
  scopes["a"] = testing::make_counts("a", {{"burn", 1, 2}, {"dream", 5, 0}});
  scopes["b"] = testing::make_counts("b", {{"burn", 3, 4}});
  const auto pool = build_pool(scopes);
  const auto& lex = testing::shipped_lexicon();
  CHECK(pool.per_lemma[*lex.index_of("burn")] == VerbCounts{4, 6});
  CHECK(pool.per_lemma[*lex.index_of("dream")] == VerbCounts{5, 0});
  CHECK(pool.total_tokens == 15);
  CHECK_THROWS_AS(build_pool(ScopeMap{}), Error);
  CHECK_THROWS_AS(pool_of({}), Error);
}

TEST_CASE("the reference counts pool to the lexicon total") {
  const auto& lex = testing::shipped_lexicon();
  PastTenseCounts ref("ref", lex.size());
  for (std::size_t i = 0; i < lex.size(); ++i) ref.per_lemma[i].irregular = lex[i].reference_token_count;
  std::vector<PastTenseCounts> one{ref};
  CHECK(build_pool(one).total_tokens == 1722005606ULL);
}

TEST_CASE("log-spaced sizes") {
  CHECK(log_spaced_sizes(3, 10, 1000) == std::vector<std::uint64_t>{10, 100, 1000});
  const auto def = log_spaced_sizes();
  CHECK(def.size() == 1000);
  CHECK(def.front() == 10);
  CHECK(def.back() == 10000000);
  CHECK(std::is_sorted(def.begin(), def.end()));
  CHECK(log_spaced_sizes(1, 50, 50) == std::vector<std::uint64_t>{50});
}

TEST_CASE("synthetic draws have the requested size") {
  const auto pool = pool_of({{"burn", 300, 100}, {"dream", 10, 90}, {"learn", 1, 0}});
  const std::vector<std::uint64_t> sizes{1, 7, 1000};
  SynthOptions o;
  o.replicates = 4;
  o.seed = 99;
  const auto out = sample_synthetic(pool, sizes, o);
  REQUIRE(out.size() == 12);
  for (const auto& c : out) {
    std::uint64_t total = 0;
    for (const auto& v : c.drawn) total += v.total();
    CHECK(total == c.target_size);
  }
}

TEST_CASE("a one-token county has fraction 0 or 1") {
  const auto pool = pool_of({{"burn", 3, 1}});
  const std::vector<std::uint64_t> sizes{1};
  SynthOptions o;
  o.replicates = 50;
  o.seed = 1;
  bool saw0 = false, saw1 = false;
  for (const auto& c : sample_synthetic(pool, sizes, o)) {
    REQUIRE(c.average_fraction);
    CHECK((*c.average_fraction == 0.0 || *c.average_fraction == 1.0));
    saw0 = saw0 || *c.average_fraction == 0.0;
    saw1 = saw1 || *c.average_fraction == 1.0;
  }
  CHECK(saw0);
  CHECK(saw1);
}

TEST_CASE("synthetic sampling is a function of the seed only") {
  const auto pool = pool_of({{"burn", 300, 100}, {"dream", 10, 90}, {"spill", 44, 55}, {"get", 1, 999}});
  const auto sizes = log_spaced_sizes(12, 10, 1e5);
  SynthOptions a;
  a.seed = 2024;
  a.workers = 1;
  SynthOptions b = a;
  b.workers = 4;
  const auto ra = sample_synthetic(pool, sizes, a);
  const auto rb = sample_synthetic(pool, sizes, b);
  REQUIRE(ra.size() == rb.size());
  for (std::size_t i = 0; i < ra.size(); ++i) {
    CHECK(ra[i].drawn == rb[i].drawn);
    CHECK(ra[i].average_fraction == rb[i].average_fraction);
  }
  SynthOptions c = a;
  c.seed = 2025;
  const auto rc = sample_synthetic(pool, sizes, c);
  std::size_t differ = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) differ += ra[i].drawn != rc[i].drawn;
  CHECK(differ > 0);
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 2));
  CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
}

TEST_CASE("large synthetic counties approach the pool average") {
  const auto pool = pool_of({{"burn", 300000, 100000}, {"dream", 10000, 90000}, {"spill", 44000, 55000},
                             {"learn", 5000, 5000}, {"get", 1000, 999000}});
  const auto target = *average_fraction(pool.per_lemma);
  const std::vector<std::uint64_t> sizes{1000000};
  SynthOptions o;
  o.seed = 8;
  for (const auto& c : sample_synthetic(pool, sizes, o)) CHECK(std::abs(*c.average_fraction - target) < 0.005);
}

TEST_CASE("synthetic CSV layout") {
  const auto pool = pool_of({{"burn", 3, 1}});
  const std::vector<std::uint64_t> sizes{2};
  SynthOptions o;
  o.replicates = 1;
  std::ostringstream out;
  write_synthetic_csv(out, sample_synthetic(pool, sizes, o));
  CHECK(out.str().rfind("size,replicate,avg_fraction\n2,0,", 0) == 0);
}

TEST_CASE("census CSV parsing") {
  std::istringstream in(
      "GEO.id,GEO.id2,GEO.display-label,HC01_VC03,HC03_VC10\n"
      "Id,Id2,Geography,Estimate; Total population,Percent; Management occupations\n"
      "0500000US01001,1001,\"Autauga County, Alabama\",55000,12.5\n"
      "0500000US50007,50007,\"Chittenden County, Vermont\",(X),30.1\n");
  const auto vars = read_acs_csv(in);
  REQUIRE(vars.size() == 2);
  CHECK(vars[0].id == "Estimate; Total population");
  CHECK(vars[0].kind == VariableKind::estimate);
  CHECK(vars[1].kind == VariableKind::percent);
  CHECK(vars[0].values.at("01001") == 55000);
  CHECK_FALSE(vars[0].values.count("50007"));
  CHECK(vars[1].values.at("50007") == doctest::Approx(30.1));

  std::istringstream no_fips("a,b\n1,2\n");
  CHECK_THROWS_AS(read_acs_csv(no_fips), Error);
}

TEST_CASE("demographic residuals against closed-form OLS") {
  const std::map<std::string, double> volume{{"00001", 10}, {"00002", 100}, {"00003", 1000}};
  DemographicVariable pct{"Percent; x", VariableKind::percent, {{"00001", 5}, {"00002", 9}, {"00003", 4}}};
  const auto r = residualize_demographic(pct, volume);
  CHECK(r.fit.slope == doctest::Approx(-0.5));
  CHECK(r.fit.intercept == doctest::Approx(7.0));
  CHECK(r.residuals[0] == doctest::Approx(-1.5));
  CHECK(r.residuals[1] == doctest::Approx(3.0));
  CHECK(r.residuals[2] == doctest::Approx(-1.5));

  DemographicVariable est{"Estimate; d", VariableKind::estimate, {{"00001", 10}, {"00002", 100}, {"00003", 1000}}};
  for (double v : residualize_demographic(est, volume).residuals) CHECK(v == 0.0);
  DemographicVariable flat{"Percent; flat", VariableKind::percent, {{"00001", 3}, {"00002", 3}, {"00003", 3}}};
  for (double v : residualize_demographic(flat, volume).residuals) CHECK(v == 0.0);

  DemographicVariable sparse{"Percent; s", VariableKind::percent, {{"00001", 3}, {"00009", 3}}};
  CHECK_THROWS_AS(residualize_demographic(sparse, volume), Error);
}

TEST_CASE("partial correlation of residual vectors") {
  const std::vector<double> a{0.1, -0.3, 0.25, 0.05, -0.1};
  std::vector<double> neg(a);
  for (auto& v : neg) v = -v;
  CHECK(partial_correlation(a, a).r == doctest::Approx(1.0));
  CHECK(partial_correlation(a, neg).r == doctest::Approx(-1.0));

  std::mt19937_64 rng(31);
  std::normal_distribution<double> z;
  std::vector<double> x(1000), y(1000);
  for (std::size_t i = 0; i < 1000; ++i) {
    x[i] = z(rng);
    y[i] = z(rng);
  }
  CHECK(std::abs(partial_correlation(x, y).r) < 0.1);
}

TEST_CASE("rank_variables orders by partial magnitude and sets failures aside") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> logd(2.0, 6.0);
  CountyPanel panel;
  std::vector<double> resid;
  DemographicVariable copy{"Percent; copy", VariableKind::percent, {}};
  DemographicVariable noise{"Percent; noise", VariableKind::percent, {}};
  DemographicVariable linear{"Estimate; linear", VariableKind::estimate, {}};
  for (std::size_t i = 0; i < 300; ++i) {
    const double ld = logd(rng);
    const double e = 0.05 * z(rng);
    const auto f = fips_of(i);
    panel.rows.push_back(row(f, static_cast<std::uint64_t>(std::pow(10.0, ld)), 0.4 - 0.03 * ld + e));
    const double d = static_cast<double>(panel.rows.back().d);
    copy.values[f] = e + 0.01 * z(rng);
    noise.values[f] = z(rng);
    linear.values[f] = d * d * 3.0;
  }
  const std::vector<DemographicVariable> vars{noise, linear, copy};
  const auto ranked = rank_variables(vars, panel, 2);
  REQUIRE(ranked.size() == 3);
  CHECK(ranked[0].id == "Percent; copy");
  CHECK(*ranked[0].partial_r > 0.9);
  CHECK(ranked[1].id == "Percent; noise");
  CHECK(ranked[2].id == "Estimate; linear");
  CHECK_FALSE(ranked[2].failure.empty());
  CHECK_FALSE(ranked[2].partial_r);
  CHECK(ranked[0].n == 300);

  std::ostringstream out;
  write_partials_csv(out, ranked);
  CHECK(out.str().rfind("variable,kind,simple_r,partial_r,n,simple_r_raw,status\n", 0) == 0);
  CHECK(out.str().find("Estimate; linear,Estimate,") != std::string::npos);
}
