#include "verbreg/cli.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <CLI11.hpp>
#include <array>
#include <fstream>
#include <functional>
#include <nlohmann/json.hpp>
#include <sstream>

#include "verbreg/csv.hpp"
#include "verbreg/error.hpp"
#include "verbreg/experiment.hpp"
#include "verbreg/geo.hpp"
#include "verbreg/ingest.hpp"
#include "verbreg/lexicon.hpp"
#include "verbreg/spatial.hpp"
#include "verbreg/stats.hpp"

#ifndef VERBREG_DATA_DIR
#define VERBREG_DATA_DIR "data"
#endif

namespace verbreg {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config

namespace {

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "lexicon",   "corpus",     "gazetteer",   "counties",  "regions",         "counts",
      "acs",       "ngrams",     "mode",        "scope",     "lemma",           "fips_column",
      "min_tokens_county", "min_tokens_verb", "fuzzy_confidence", "smoothing", "year",
      "sizes",     "size_min",   "size_max",    "replicates", "alpha",          "t_subset",
      "seed",      "workers",    "out"};
  return keys;
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  std::int64_t out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw Error(ErrorKind::config, key + ": not an integer '" + v + "'");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw Error(ErrorKind::config, key + ": not a number '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  const auto s = csv::to_lower(v);
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw Error(ErrorKind::config, key + ": not a boolean '" + v + "'");
}

std::string path_list(const std::vector<fs::path>& paths) {
  std::string out;
  for (const auto& p : paths) {
    if (!out.empty()) out += ',';
    out += p.string();
  }
  return out;
}

}  // namespace

std::map<std::string, std::string> parse_config_text(std::istream& in) {
  std::map<std::string, std::string> values;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = csv::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorKind::config, fmt::format("config line {}: expected key = value", line_no));
    std::string key(csv::trim(body.substr(0, eq)));
    std::replace(key.begin(), key.end(), '-', '_');
    const auto& keys = config_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      throw Error(ErrorKind::config, fmt::format("config line {}: unknown key '{}'", line_no, key));
    values[key] = std::string(csv::trim(body.substr(eq + 1)));
  }
  return values;
}

void apply_config(RunConfig& c, const std::map<std::string, std::string>& values) {
  for (const auto& [key, v] : values) {
    if (key == "lexicon") c.lexicon = v;
    else if (key == "corpus") {
      c.corpus.clear();
      std::stringstream ss(v);
      std::string item;
      while (std::getline(ss, item, ','))
        if (const auto t = csv::trim(item); !t.empty()) c.corpus.emplace_back(std::string(t));
    }
    else if (key == "gazetteer") c.gazetteer = v;
    else if (key == "counties") c.counties = v;
    else if (key == "regions") c.regions = v;
    else if (key == "counts") c.counts = v;
    else if (key == "acs") c.acs = v;
    else if (key == "ngrams") c.ngrams = v;
    else if (key == "mode") c.mode = v;
    else if (key == "scope") c.scope = v;
    else if (key == "lemma") c.lemma = v;
    else if (key == "fips_column") c.fips_column = v;
    else if (key == "min_tokens_county") c.min_tokens_county = to_int(key, v);
    else if (key == "min_tokens_verb") c.min_tokens_verb = to_int(key, v);
    else if (key == "fuzzy_confidence") c.fuzzy_confidence = to_int(key, v);
    else if (key == "smoothing") c.smoothing = to_int(key, v);
    else if (key == "year") c.year = to_int(key, v);
    else if (key == "sizes") c.sizes = to_int(key, v);
    else if (key == "size_min") c.size_min = to_double(key, v);
    else if (key == "size_max") c.size_max = to_double(key, v);
    else if (key == "replicates") c.replicates = to_int(key, v);
    else if (key == "alpha") c.alpha = to_double(key, v);
    else if (key == "t_subset") c.t_subset = to_bool(key, v);
    else if (key == "seed") {
      const auto s = to_int(key, v);
      if (s < 0) throw Error(ErrorKind::config, "seed must be nonnegative");
      c.seed = static_cast<std::uint64_t>(s);
    }
    else if (key == "workers") c.workers = to_int(key, v);
    else if (key == "out") c.out = v;
    else throw Error(ErrorKind::config, "unknown key '" + key + "'");
  }
}

std::string canonical_config(const RunConfig& c) {
  std::ostringstream o;
  o << "acs=" << c.acs.string() << '\n'
    << "alpha=" << fmt::format("{}", c.alpha) << '\n'
    << "corpus=" << path_list(c.corpus) << '\n'
    << "counties=" << c.counties.string() << '\n'
    << "counts=" << c.counts.string() << '\n'
    << "fips_column=" << c.fips_column << '\n'
    << "fuzzy_confidence=" << c.fuzzy_confidence << '\n'
    << "gazetteer=" << c.gazetteer.string() << '\n'
    << "lemma=" << c.lemma << '\n'
    << "lexicon=" << c.lexicon.string() << '\n'
    << "min_tokens_county=" << c.min_tokens_county << '\n'
    << "min_tokens_verb=" << c.min_tokens_verb << '\n'
    << "mode=" << c.mode << '\n'
    << "ngrams=" << c.ngrams.string() << '\n'
    << "regions=" << c.regions.string() << '\n'
    << "replicates=" << c.replicates << '\n'
    << "scope=" << c.scope << '\n'
    << "seed=" << c.seed << '\n'
    << "size_max=" << fmt::format("{}", c.size_max) << '\n'
    << "size_min=" << fmt::format("{}", c.size_min) << '\n'
    << "sizes=" << c.sizes << '\n'
    << "smoothing=" << c.smoothing << '\n'
    << "t_subset=" << (c.t_subset ? "true" : "false") << '\n'
    << "year=" << c.year << '\n';
  return o.str();
}

// ---------------------------------------------------------------------------
// Digests

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (ctx_ == nullptr || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1)
      throw std::runtime_error("sha256 init failed");
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t len) { EVP_DigestUpdate(ctx_, data, len); }

  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, md.data(), &len);
    std::string out;
    for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", md[i]);
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

}  // namespace

std::string sha256_hex(std::string_view data) {
  Sha256 h;
  h.update(data.data(), data.size());
  return h.hex();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::input, "cannot open " + path.string());
  Sha256 h;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

// ---------------------------------------------------------------------------
// Commands

namespace {

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::input: return 3;
    case ErrorKind::precondition: return 4;
    case ErrorKind::degenerate: return 5;
  }
  return 1;
}

// Tracks inputs and outputs of one run and writes its manifest.
class Run {
 public:
  Run(std::string command, const RunConfig& config) : command_(std::move(command)), config_(config) {}

  const RunConfig& config() const { return config_; }

  const fs::path& input(const fs::path& p, const char* what) {
    if (p.empty()) throw Error(ErrorKind::config, std::string("missing required ") + what);
    if (!fs::is_regular_file(p))
      throw Error(ErrorKind::config, std::string(what) + " not found: " + p.string());
    inputs_.push_back(p);
    return p;
  }

  void write(const std::string& name, const std::string& content) {
    fs::create_directories(config_.out);
    const fs::path path = config_.out / name;
    {
      std::ofstream f(path, std::ios::binary);
      f << content;
      f.flush();
      if (!f) throw Error(ErrorKind::input, "failed writing " + path.string());
    }
    if (fs::file_size(path) != content.size())
      throw Error(ErrorKind::input, "short write to " + path.string());
    outputs_.emplace_back(name, sha256_hex(content));
  }

  void write_manifest() {
    json m;
    m["tool"] = "verbreg";
    m["version"] = kToolkitVersion;
    m["command"] = command_;
    const auto canonical = canonical_config(config_);
    m["config"] = canonical;
    m["config_hash"] = sha256_hex(canonical);
    m["seed"] = config_.seed;
    json in = json::array();
    for (const auto& p : inputs_) in.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
    m["inputs"] = std::move(in);
    json out = json::array();
    for (const auto& [name, digest] : outputs_) out.push_back({{"file", name}, {"sha256", digest}});
    m["outputs"] = std::move(out);
    write("manifest.json", m.dump(2) + "\n");
  }

 private:
  std::string command_;
  RunConfig config_;
  std::vector<fs::path> inputs_;
  std::vector<std::pair<std::string, std::string>> outputs_;
};

std::size_t workers_of(const RunConfig& c) { return static_cast<std::size_t>(std::max<std::int64_t>(1, c.workers)); }

void validate(const RunConfig& c) {
  const auto positive = [](std::int64_t v, const char* name) {
    if (v <= 0) throw Error(ErrorKind::config, std::string(name) + " must be positive");
  };
  positive(c.min_tokens_county, "min_tokens_county");
  positive(c.min_tokens_verb, "min_tokens_verb");
  positive(c.fuzzy_confidence, "fuzzy_confidence");
  positive(c.replicates, "replicates");
  positive(c.sizes, "sizes");
  positive(c.workers, "workers");
  if (c.fuzzy_confidence > 100) throw Error(ErrorKind::config, "fuzzy_confidence must be <= 100");
  if (c.smoothing < 0) throw Error(ErrorKind::config, "smoothing must be nonnegative");
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw Error(ErrorKind::config, "alpha must be in (0, 1)");
  if (!(c.size_min >= 1.0 && c.size_max >= c.size_min))
    throw Error(ErrorKind::config, "need 1 <= size_min <= size_max");
}

Lexicon open_lexicon(Run& run) {
  fs::path p = run.config().lexicon.empty() ? default_lexicon_path() : run.config().lexicon;
  return load_lexicon(run.input(p, "lexicon"));
}

int cmd_count(Run& run, std::ostream& /*out*/, std::ostream& err) {
  const auto& c = run.config();
  const auto mode = parse_scope_mode(c.mode);
  if (!mode) throw Error(ErrorKind::config, "unknown mode '" + c.mode + "'");
  if (c.corpus.empty()) throw Error(ErrorKind::config, "missing required corpus");
  const Lexicon lexicon = open_lexicon(run);

  std::optional<RegionSet> regions;
  std::optional<Gazetteer> gazetteer;
  std::optional<CountyIndex> counties;
  if (*mode == ScopeMode::us_geo || *mode == ScopeMode::uk_geo) {
    fs::path p = c.regions.empty() ? fs::path(VERBREG_DATA_DIR) / "regions.geojson" : c.regions;
    regions = load_regions(run.input(p, "regions"));
  }
  if (*mode == ScopeMode::county) {
    gazetteer = load_gazetteer(run.input(c.gazetteer, "gazetteer"));
    counties = load_counties(run.input(c.counties, "counties"));
  }
  for (const auto& p : c.corpus) run.input(p, "corpus file");

  const ScopeResolver resolver(*mode, regions ? &*regions : nullptr, gazetteer ? &*gazetteer : nullptr,
                               counties ? &*counties : nullptr, static_cast<int>(c.fuzzy_confidence));
  const Scoper scoper = [&resolver](const Record& r) { return resolver(r); };
  CountOptions options;
  options.workers = workers_of(c);
  const auto result = count_files(c.corpus, lexicon, scoper, options);

  if (result.report.tokens_matched == 0) err << "warning: no verb tokens matched\n";
  std::ostringstream counts;
  write_counts_csv(counts, result.scopes, lexicon);
  run.write("counts.csv", counts.str());
  run.write("report.json", to_json(result.report) + "\n");
  run.write_manifest();
  return 0;
}

int cmd_table(Run& run, std::ostream& out, std::ostream& /*err*/) {
  const auto& c = run.config();
  const Lexicon lexicon = open_lexicon(run);
  const VerbFilter filter = c.t_subset ? VerbFilter(t_subset_filter) : VerbFilter();
  RegularizationTable table;
  if (!c.ngrams.empty() && !c.counts.empty())
    throw Error(ErrorKind::config, "give either counts or ngrams, not both");
  if (!c.ngrams.empty()) {
    const auto series = load_frequency_series(run.input(c.ngrams, "ngrams series"));
    const auto weights = ngram_weights(series, lexicon, static_cast<int>(c.smoothing),
                                       static_cast<int>(c.year), c.scope.empty() ? "ngrams" : c.scope);
    table = build_table(weights, lexicon, filter);
  } else {
    const auto scopes = load_counts_csv(run.input(c.counts, "counts"), lexicon);
    const PastTenseCounts* chosen = nullptr;
    if (!c.scope.empty()) {
      const auto it = scopes.find(c.scope);
      if (it == scopes.end()) throw Error(ErrorKind::config, "scope '" + c.scope + "' not in counts");
      chosen = &it->second;
    } else if (scopes.size() == 1) {
      chosen = &scopes.begin()->second;
    } else {
      throw Error(ErrorKind::config, "counts hold several scopes; choose one with --scope");
    }
    table = build_table(*chosen, lexicon, filter);
  }
  std::ostringstream csv_out;
  write_table_csv(csv_out, table);
  run.write("table.csv", csv_out.str());
  run.write("table.json", table_to_json(table) + "\n");
  run.write_manifest();
  if (table.average)
    out << fmt::format("{}: {} verbs, average fraction {:.4f}\n", table.scope_id, table.verb_count(), *table.average);
  else
    out << table.scope_id << ": no verbs with data\n";
  return 0;
}

RegularizationTable read_table_file(Run& run, const fs::path& p) {
  std::ifstream in(run.input(p, "table"));
  return read_table_csv(in, p.string());
}

int cmd_compare(Run& run, const std::vector<std::string>& tables, std::ostream& out,
                std::ostream& /*err*/) {
  if (tables.size() != 2) throw Error(ErrorKind::config, "compare takes exactly two table files");
  const auto a = read_table_file(run, tables[0]);
  const auto b = read_table_file(run, tables[1]);
  const auto diff = difference_table(a, b);

  std::vector<std::pair<double, double>> pairs;
  std::vector<double> xa, xb;
  std::size_t more_a = 0, more_b = 0, ties = 0;
  for (const auto& r : diff.rows) {
    pairs.emplace_back(r.a, r.b);
    xa.push_back(r.a);
    xb.push_back(r.b);
    if (r.a > r.b) ++more_a;
    else if (r.b > r.a) ++more_b;
    else ++ties;
  }

  json report;
  const auto side = [](const RegularizationTable& t) {
    return json{{"name", t.scope_id}, {"verb_count", t.verb_count()},
                {"average", t.average ? json(*t.average) : json(nullptr)}};
  };
  report["a"] = side(a);
  report["b"] = side(b);
  report["shared_lemmas"] = diff.rows.size();
  report["more_regular_in_a"] = more_a;
  report["more_regular_in_b"] = more_b;
  report["ties"] = ties;
  report["average_difference"] = diff.average;
  try {
    report["wilcoxon"] = json::parse(to_json(wilcoxon_signed_rank(pairs)));
  } catch (const Error& e) {
    report["wilcoxon"] = {{"error", e.what()}, {"kind", to_string(e.kind())}};
  }
  try {
    const auto s = spearman(xa, xb);
    report["spearman"] = {{"rho", s.r}, {"p_value", s.p_value}, {"n", s.n}};
  } catch (const Error& e) {
    report["spearman"] = {{"error", e.what()}, {"kind", to_string(e.kind())}};
  }
  std::ostringstream d;
  write_difference_csv(d, diff);
  run.write("difference.csv", d.str());
  run.write("comparison.json", report.dump(2) + "\n");
  run.write_manifest();
  out << fmt::format("{} shared verbs: {} more regular in {}, {} more regular in {}; average difference {:.4f}\n",
                     diff.rows.size(), more_a, a.scope_id, more_b, b.scope_id, diff.average);
  return 0;
}

SpatialOptions spatial_options(const RunConfig& c, std::int64_t min_tokens) {
  SpatialOptions o;
  o.min_tokens = static_cast<std::uint64_t>(min_tokens);
  o.alpha = c.alpha;
  o.workers = workers_of(c);
  return o;
}

int cmd_counties(Run& run, std::ostream& out, std::ostream& /*err*/) {
  const auto& c = run.config();
  const Lexicon lexicon = open_lexicon(run);
  const auto scopes = load_counts_csv(run.input(c.counts, "counts"), lexicon);
  const auto geometry = load_counties(run.input(c.counties, "counties"));
  const auto panel = county_pipeline(scopes, lexicon, geometry, spatial_options(c, c.min_tokens_county));
  std::ostringstream csv_out, geo_out;
  write_panel_csv(csv_out, panel);
  write_panel_geojson(geo_out, panel, geometry);
  run.write("panel.csv", csv_out.str());
  run.write("panel.geojson", geo_out.str());
  run.write_manifest();
  out << fmt::format("{} counties in panel, {} excluded; fit slope {:.5f} intercept {:.5f}\n",
                     panel.rows.size(), panel.excluded.size(), panel.fit.slope, panel.fit.intercept);
  return 0;
}

int cmd_verbmap(Run& run, std::ostream& out, std::ostream& /*err*/) {
  const auto& c = run.config();
  if (c.lemma.empty()) throw Error(ErrorKind::config, "missing required lemma");
  const Lexicon lexicon = open_lexicon(run);
  if (!lexicon.index_of(c.lemma)) throw Error(ErrorKind::config, "lemma '" + c.lemma + "' not in lexicon");
  const auto scopes = load_counts_csv(run.input(c.counts, "counts"), lexicon);
  const auto geometry = load_counties(run.input(c.counties, "counties"));
  const auto panel = verb_pipeline(scopes, lexicon, c.lemma, geometry, spatial_options(c, c.min_tokens_verb));
  std::ostringstream csv_out, geo_out;
  write_verb_panel_csv(csv_out, panel);
  write_verb_panel_geojson(geo_out, panel, geometry);
  run.write("verbmap_" + c.lemma + ".csv", csv_out.str());
  run.write("verbmap_" + c.lemma + ".geojson", geo_out.str());
  run.write_manifest();
  out << fmt::format("{}: {} counties mapped, {} excluded\n", c.lemma, panel.rows.size(), panel.excluded.size());
  return 0;
}

int cmd_synth(Run& run, std::ostream& out, std::ostream& /*err*/) {
  const auto& c = run.config();
  const Lexicon lexicon = open_lexicon(run);
  const auto scopes = load_counts_csv(run.input(c.counts, "counts"), lexicon);
  const auto pool = build_pool(scopes);
  const auto sizes = log_spaced_sizes(static_cast<std::size_t>(c.sizes), c.size_min, c.size_max);
  SynthOptions options;
  options.replicates = static_cast<std::size_t>(c.replicates);
  options.seed = c.seed;
  options.workers = workers_of(c);
  options.keep_counts = false;
  const auto synthetic = sample_synthetic(pool, sizes, options);

  std::ostringstream csv_out;
  write_synthetic_csv(csv_out, synthetic);
  const auto pool_avg = average_fraction(pool.per_lemma);
  json meta = {{"seed", c.seed},
               {"replicates", c.replicates},
               {"sizes", c.sizes},
               {"size_min", c.size_min},
               {"size_max", c.size_max},
               {"sampling", "multinomial with replacement"},
               {"generator", "mt19937_64 per (size, replicate) task seeded by splitmix64; conditional binomial draws"},
               {"pool_tokens", pool.total_tokens},
               {"pool_average_fraction", pool_avg ? json(*pool_avg) : json(nullptr)}};
  run.write("synthetic.csv", csv_out.str());
  run.write("synthetic_meta.json", meta.dump(2) + "\n");
  run.write_manifest();
  out << fmt::format("{} synthetic counties from a pool of {} tokens (seed {})\n", synthetic.size(),
                     pool.total_tokens, c.seed);
  return 0;
}

int cmd_correlate(Run& run, std::ostream& out, std::ostream& /*err*/) {
  const auto& c = run.config();
  const Lexicon lexicon = open_lexicon(run);
  const auto scopes = load_counts_csv(run.input(c.counts, "counts"), lexicon);
  const auto variables = load_acs_csv(run.input(c.acs, "acs"), c.fips_column);
  const auto panel = build_volume_panel(scopes, lexicon, static_cast<std::uint64_t>(c.min_tokens_county));
  const auto ranked = rank_variables(variables, panel, workers_of(c));
  std::ostringstream csv_out;
  write_partials_csv(csv_out, ranked);
  json meta = {{"seed", c.seed},
               {"counties", panel.rows.size()},
               {"variables", variables.size()},
               {"simple_r", "Estimate variables: log10(D) vs R (simple_r_raw: D vs R); Percent: D vs R"},
               {"partial_r", "Pearson of residuals after regressing each side on log10(d)"}};
  run.write("partials.csv", csv_out.str());
  run.write("partials_meta.json", meta.dump(2) + "\n");
  run.write_manifest();
  const auto first = std::find_if(ranked.begin(), ranked.end(), [](const auto& v) { return v.failure.empty(); });
  if (first != ranked.end())
    out << fmt::format("{} variables; top |partial| {:.3f}: {}\n", ranked.size(), *first->partial_r, first->id);
  else
    out << ranked.size() << " variables; none could be ranked\n";
  return 0;
}

int cmd_lexicon_validate(Run& run, std::ostream& out, std::ostream& /*err*/) {
  const Lexicon lexicon = open_lexicon(run);
  std::uint64_t ref = 0;
  for (const auto& e : lexicon.entries()) ref += e.reference_token_count;
  json summary = {{"lemmas", lexicon.size()},
                  {"forms", lexicon.form_count()},
                  {"t_subset", lexicon.t_subset().size()},
                  {"reference_tokens", ref}};
  out << summary.dump(2) << '\n';
  return 0;
}

void report_error(const std::string& command, const std::string& kind, const std::string& message,
                  const RunConfig* config, std::ostream& err) {
  const json e = {{"error", {{"command", command}, {"kind", kind}, {"message", message}}}};
  err << e.dump() << '\n';
  if (config != nullptr && !command.empty() && fs::is_directory(config->out)) {
    std::ofstream f(config->out / "error.json");
    f << e.dump(2) << '\n';
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"verbreg: verb regularization corpus analytics"};
  app.require_subcommand(1);

  std::string config_path;
  std::map<std::string, std::string> flags;
  std::vector<std::string> corpus;
  std::vector<std::string> tables;

  const auto flag = [&flags](CLI::App* sub, const std::string& name, const std::string& key,
                             const std::string& help) {
    sub->add_option_function<std::string>(name, [&flags, key](const std::string& v) { flags[key] = v; }, help);
  };
  const auto globals = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value config file; flags override it");
    flag(sub, "--workers", "workers", "worker threads");
    flag(sub, "--seed", "seed", "random seed");
    flag(sub, "--out", "out", "output directory");
    flag(sub, "--lexicon", "lexicon", "lexicon CSV (default: shipped lexicon)");
  };

  auto* count = app.add_subcommand("count", "count past-tense tokens per scope");
  globals(count);
  count->add_option("--corpus", corpus, "JSON-lines record files (gzip allowed)");
  flag(count, "--mode", "mode", "all | us_geo | uk_geo | county");
  flag(count, "--gazetteer", "gazetteer", "gazetteer CSV");
  flag(count, "--counties", "counties", "county GeoJSON");
  flag(count, "--regions", "regions", "region GeoJSON");
  flag(count, "--fuzzy-confidence", "fuzzy_confidence", "city match threshold 0-100");

  auto* table = app.add_subcommand("table", "regularization table for one scope or an n-gram export");
  globals(table);
  flag(table, "--counts", "counts", "counts CSV from `count`");
  flag(table, "--scope", "scope", "scope to tabulate");
  flag(table, "--ngrams", "ngrams", "frequency series CSV");
  flag(table, "--year", "year", "n-gram year");
  flag(table, "--smoothing", "smoothing", "n-gram smoothing half-window");
  table->add_flag_function("--t-subset", [&flags](std::int64_t) { flags["t_subset"] = "true"; },
                           "only verbs with an irregular -t past");

  auto* compare = app.add_subcommand("compare", "compare two regularization tables");
  globals(compare);
  compare->add_option("tables", tables, "two table CSV files")->expected(2);

  auto* counties = app.add_subcommand("counties", "county panel with residuals and Gi*");
  globals(counties);
  flag(counties, "--counts", "counts", "county counts CSV");
  flag(counties, "--counties", "counties", "county GeoJSON");
  flag(counties, "--min-tokens", "min_tokens_county", "minimum total tokens per county");
  flag(counties, "--alpha", "alpha", "significance level");

  auto* verbmap = app.add_subcommand("verbmap", "per-verb county fractions and Gi*");
  globals(verbmap);
  flag(verbmap, "--counts", "counts", "county counts CSV");
  flag(verbmap, "--counties", "counties", "county GeoJSON");
  flag(verbmap, "--lemma", "lemma", "verb to map");
  flag(verbmap, "--min-tokens", "min_tokens_verb", "minimum tokens of the verb per county");
  flag(verbmap, "--alpha", "alpha", "significance level");

  auto* synth = app.add_subcommand("synth", "synthetic-county sampling experiment");
  globals(synth);
  flag(synth, "--counts", "counts", "counts CSV; all scopes are pooled");
  flag(synth, "--sizes", "sizes", "number of log-spaced sizes");
  flag(synth, "--size-min", "size_min", "smallest size");
  flag(synth, "--size-max", "size_max", "largest size");
  flag(synth, "--replicates", "replicates", "draws per size");

  auto* correlate = app.add_subcommand("correlate", "demographic simple and partial correlations");
  globals(correlate);
  flag(correlate, "--counts", "counts", "county counts CSV");
  flag(correlate, "--acs", "acs", "census wide CSV");
  flag(correlate, "--fips-column", "fips_column", "county id column");
  flag(correlate, "--min-tokens", "min_tokens_county", "minimum total tokens per county");

  auto* lexval = app.add_subcommand("lexicon-validate", "load and validate a lexicon");
  globals(lexval);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    report_error("", "config", e.what(), nullptr, err);
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  if (command == "count" && !corpus.empty()) {
    std::string joined;
    for (const auto& p : corpus) joined += (joined.empty() ? "" : ",") + p;
    flags["corpus"] = joined;
  }

  RunConfig config;
  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw Error(ErrorKind::config, "cannot open config " + config_path);
      apply_config(config, parse_config_text(in));
    }
    apply_config(config, flags);
    validate(config);

    Run run(command, config);
    if (command == "count") return cmd_count(run, out, err);
    if (command == "table") return cmd_table(run, out, err);
    if (command == "compare") return cmd_compare(run, tables, out, err);
    if (command == "counties") return cmd_counties(run, out, err);
    if (command == "verbmap") return cmd_verbmap(run, out, err);
    if (command == "synth") return cmd_synth(run, out, err);
    if (command == "correlate") return cmd_correlate(run, out, err);
    if (command == "lexicon-validate") return cmd_lexicon_validate(run, out, err);
    throw Error(ErrorKind::config, "unknown command " + command);
  } catch (const Error& e) {
    report_error(command, to_string(e.kind()), e.what(), &config, err);
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    report_error(command, "internal", e.what(), &config, err);
    return 1;
  }
}

}  // namespace verbreg
