#include "verbreg/ingest.hpp"

#include <zlib.h>

#include <cmath>
#include <condition_variable>
#include <deque>
#include <exception>
#include <fstream>
#include <istream>
#include <mutex>
#include <nlohmann/json.hpp>
#include <ostream>
#include <set>
#include <thread>

#include "verbreg/csv.hpp"
#include "verbreg/error.hpp"

namespace verbreg {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Records

std::optional<Record> parse_record(std::string_view line) {
  json doc = json::parse(line.begin(), line.end(), nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object()) return std::nullopt;

  Record r;
  const auto text = doc.find("text");
  if (text == doc.end() || !text->is_string()) return std::nullopt;
  r.text = text->get<std::string>();

  if (const auto geo = doc.find("geo"); geo != doc.end() && !geo->is_null()) {
    if (!geo->is_object()) return std::nullopt;
    const auto lat = geo->find("lat");
    const auto lon = geo->find("lon");
    if (lat == geo->end() || lon == geo->end() || !lat->is_number() || !lon->is_number())
      return std::nullopt;
    GeoPoint p{lat->get<double>(), lon->get<double>()};
    if (!(p.lat >= -90.0 && p.lat <= 90.0 && p.lon >= -180.0 && p.lon <= 180.0))
      return std::nullopt;
    r.geo = p;
  }
  if (const auto loc = doc.find("user_location"); loc != doc.end() && !loc->is_null()) {
    if (!loc->is_string()) return std::nullopt;
    r.user_location = loc->get<std::string>();
  }
  if (const auto ts = doc.find("ts"); ts != doc.end() && !ts->is_null()) {
    if (!ts->is_string()) return std::nullopt;
    r.timestamp = ts->get<std::string>();
  }
  return r;
}

// ---------------------------------------------------------------------------
// Tokenization

namespace {

enum class CharKind { letter, apostrophe, separator };

// Decodes one code point at `pos`; malformed bytes decode as a single
// separator byte.
CharKind next_char(std::string_view s, std::size_t& pos, std::size_t& len, char& folded) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  len = 1;
  if (b0 < 0x80) {
    folded = static_cast<char>(b0);
    if (b0 >= 'A' && b0 <= 'Z') {
      folded = static_cast<char>(b0 - 'A' + 'a');
      return CharKind::letter;
    }
    if (b0 >= 'a' && b0 <= 'z') return CharKind::letter;
    if (b0 == '\'') return CharKind::apostrophe;
    return CharKind::separator;
  }
  std::size_t need = 0;
  std::uint32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    need = 1;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    need = 2;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    need = 3;
    cp = b0 & 0x07;
  } else {
    return CharKind::separator;
  }
  if (pos + need >= s.size()) return CharKind::separator;
  for (std::size_t k = 1; k <= need; ++k) {
    const auto b = static_cast<unsigned char>(s[pos + k]);
    if ((b & 0xC0) != 0x80) return CharKind::separator;
    cp = (cp << 6) | (b & 0x3F);
  }
  len = need + 1;
  if (cp == 0x2019) return CharKind::apostrophe;
  if (cp >= 0x00C0 && cp <= 0x024F && cp != 0x00D7 && cp != 0x00F7) return CharKind::letter;
  return CharKind::separator;
}

}  // namespace

bool Tokenizer::next(std::string_view& token) {
  while (pos_ < text_.size()) {
    buffer_.clear();
    std::size_t trailing_apostrophes = 0;
    while (pos_ < text_.size()) {
      std::size_t len = 1;
      char folded = 0;
      const CharKind kind = next_char(text_, pos_, len, folded);
      if (kind == CharKind::separator) {
        pos_ += len;
        break;
      }
      if (kind == CharKind::apostrophe) {
        // Leading apostrophes are dropped outright.
        if (!buffer_.empty()) {
          buffer_.push_back('\'');
          ++trailing_apostrophes;
        }
      } else {
        trailing_apostrophes = 0;
        if (len == 1)
          buffer_.push_back(folded);
        else
          buffer_.append(text_.substr(pos_, len));
      }
      pos_ += len;
    }
    buffer_.resize(buffer_.size() - trailing_apostrophes);
    if (!buffer_.empty()) {
      token = buffer_;
      return true;
    }
  }
  return false;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  Tokenizer tok(text);
  std::string_view t;
  while (tok.next(t)) out.emplace_back(t);
  return out;
}

// ---------------------------------------------------------------------------
// Counting

void PastTenseCounts::add(const Classification& c, std::uint64_t n) {
  auto& v = per_lemma.at(c.lemma_index);
  if (c.form_class == FormClass::regular)
    v.regular += n;
  else
    v.irregular += n;
}

PastTenseCounts& PastTenseCounts::operator+=(const PastTenseCounts& other) {
  if (per_lemma.size() != other.per_lemma.size())
    throw Error(ErrorKind::precondition, "merging counts over different lexicons");
  for (std::size_t i = 0; i < per_lemma.size(); ++i) {
    per_lemma[i].regular += other.per_lemma[i].regular;
    per_lemma[i].irregular += other.per_lemma[i].irregular;
  }
  return *this;
}

std::uint64_t PastTenseCounts::total() const noexcept {
  std::uint64_t t = 0;
  for (const auto& v : per_lemma) t += v.total();
  return t;
}

LoadReport& LoadReport::operator+=(const LoadReport& other) {
  records_read += other.records_read;
  records_skipped += other.records_skipped;
  tokens_matched += other.tokens_matched;
  return *this;
}

std::string to_json(const LoadReport& report) {
  json j;
  j["records_read"] = report.records_read;
  j["records_skipped"] = report.records_skipped;
  j["tokens_matched"] = report.tokens_matched;
  return j.dump(2);
}

void merge_into(ScopeMap& into, const ScopeMap& from) {
  for (const auto& [scope, counts] : from) {
    auto it = into.find(scope);
    if (it == into.end())
      into.emplace(scope, counts);
    else
      it->second += counts;
  }
}

namespace {

// Private per-worker state.
struct Tally {
  const Lexicon& lexicon;
  const Scoper& scoper;
  ScopeMap scopes;
  LoadReport report;

  void consume(std::string_view line) {
    if (csv::trim(line).empty()) return;
    ++report.records_read;
    auto record = parse_record(line);
    if (!record) {
      ++report.records_skipped;
      return;
    }
    consume(*record);
  }

  void consume(const Record& record) {
    const auto scope = scoper(record);
    if (!scope) return;
    auto it = scopes.find(*scope);
    if (it == scopes.end())
      it = scopes.emplace(*scope, PastTenseCounts(*scope, lexicon.size())).first;
    Tokenizer tok(record.text);
    std::string_view token;
    while (tok.next(token)) {
      if (const auto c = lexicon.classify(token)) {
        it->second.add(*c);
        ++report.tokens_matched;
      }
    }
  }
};

// Bounded hand-off of line batches from the reading thread to workers.
class BatchQueue {
 public:
  explicit BatchQueue(std::size_t capacity) : capacity_(capacity) {}

  void push(std::vector<std::string> batch) {
    std::unique_lock lock(mutex_);
    not_full_.wait(lock, [&] { return queue_.size() < capacity_ || aborted_; });
    if (aborted_) return;
    queue_.push_back(std::move(batch));
    not_empty_.notify_one();
  }

  bool pop(std::vector<std::string>& batch) {
    std::unique_lock lock(mutex_);
    not_empty_.wait(lock, [&] { return !queue_.empty() || closed_ || aborted_; });
    if (aborted_ || queue_.empty()) return false;
    batch = std::move(queue_.front());
    queue_.pop_front();
    not_full_.notify_one();
    return true;
  }

  void close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    not_empty_.notify_all();
  }

  void abort() {
    std::lock_guard lock(mutex_);
    aborted_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

 private:
  std::size_t capacity_;
  std::deque<std::vector<std::string>> queue_;
  bool closed_ = false;
  bool aborted_ = false;
  std::mutex mutex_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
};

}  // namespace

CountResult count_stream(LineSource& source, const Lexicon& lexicon, const Scoper& scoper,
                         const CountOptions& options) {
  const std::size_t workers = std::max<std::size_t>(1, options.workers);
  const std::size_t batch_lines = std::max<std::size_t>(1, options.batch_lines);

  if (workers == 1) {
    Tally tally{lexicon, scoper, {}, {}};
    std::string line;
    while (source.next(line)) tally.consume(line);
    return {std::move(tally.scopes), tally.report};
  }

  BatchQueue queue(workers * 2);
  std::vector<Tally> tallies;
  tallies.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) tallies.push_back(Tally{lexicon, scoper, {}, {}});

  std::mutex error_mutex;
  std::exception_ptr error;
  const auto record_error = [&](std::exception_ptr e) {
    std::lock_guard lock(error_mutex);
    if (!error) error = e;
    queue.abort();
  };

  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        std::vector<std::string> batch;
        while (queue.pop(batch))
          for (const auto& line : batch) tallies[w].consume(line);
      } catch (...) {
        record_error(std::current_exception());
      }
    });
  }

  try {
    std::vector<std::string> batch;
    batch.reserve(batch_lines);
    std::string line;
    while (source.next(line)) {
      batch.push_back(std::move(line));
      if (batch.size() == batch_lines) {
        queue.push(std::move(batch));
        batch = {};
        batch.reserve(batch_lines);
      }
    }
    if (!batch.empty()) queue.push(std::move(batch));
  } catch (...) {
    record_error(std::current_exception());
  }
  queue.close();
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);

  CountResult result;
  for (auto& t : tallies) {
    merge_into(result.scopes, t.scopes);
    result.report += t.report;
  }
  return result;
}

CountResult count_records(std::span<const Record> records, const Lexicon& lexicon,
                          const Scoper& scoper) {
  Tally tally{lexicon, scoper, {}, {}};
  for (const auto& r : records) {
    ++tally.report.records_read;
    tally.consume(r);
  }
  return {std::move(tally.scopes), tally.report};
}

CountResult count_files(std::span<const std::filesystem::path> paths, const Lexicon& lexicon,
                        const Scoper& scoper, const CountOptions& options) {
  CountResult total;
  for (const auto& p : paths) {
    FileLineSource source(p);
    auto part = count_stream(source, lexicon, scoper, options);
    merge_into(total.scopes, part.scopes);
    total.report += part.report;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Line sources

struct FileLineSource::Impl {
  gzFile file = nullptr;
  std::string path;
  std::vector<char> buffer = std::vector<char>(1 << 16);
};

FileLineSource::FileLineSource(const std::filesystem::path& path) : impl_(std::make_unique<Impl>()) {
  impl_->path = path.string();
  // gzopen reads uncompressed files transparently.
  impl_->file = gzopen(impl_->path.c_str(), "rb");
  if (impl_->file == nullptr) throw Error(ErrorKind::input, "cannot open " + impl_->path);
  gzbuffer(impl_->file, 1 << 17);
}

FileLineSource::~FileLineSource() {
  if (impl_ && impl_->file) gzclose(impl_->file);
}

bool FileLineSource::next(std::string& line) {
  line.clear();
  bool got_any = false;
  while (true) {
    char* r = gzgets(impl_->file, impl_->buffer.data(), static_cast<int>(impl_->buffer.size()));
    if (r == nullptr) {
      int err = Z_OK;
      const char* msg = gzerror(impl_->file, &err);
      if (err != Z_OK && err != Z_STREAM_END)
        throw Error(ErrorKind::input, "read failure in " + impl_->path + ": " + msg);
      if (!gzeof(impl_->file) && err != Z_OK)
        throw Error(ErrorKind::input, "read failure in " + impl_->path);
      break;
    }
    got_any = true;
    line.append(r);
    if (!line.empty() && line.back() == '\n') {
      line.pop_back();
      break;
    }
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return got_any;
}

bool StreamLineSource::next(std::string& line) {
  if (!std::getline(in_, line)) {
    if (in_.bad()) throw Error(ErrorKind::input, "stream read failure");
    return false;
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

// ---------------------------------------------------------------------------
// Counts CSV

void write_counts_csv(std::ostream& out, const ScopeMap& scopes, const Lexicon& lexicon) {
  out << "scope,tokens";
  for (const auto& e : lexicon.entries()) out << ',' << e.lemma << ".regular," << e.lemma << ".irregular";
  out << '\n';
  for (const auto& [scope, counts] : scopes) {
    out << csv::quote(scope) << ',' << counts.total();
    for (const auto& v : counts.per_lemma) out << ',' << v.regular << ',' << v.irregular;
    out << '\n';
  }
}

ScopeMap read_counts_csv(std::istream& in, const Lexicon& lexicon) {
  const auto fail = [](const std::string& m) -> void {
    throw Error(ErrorKind::input, "counts csv: " + m);
  };
  std::string line;
  ScopeMap scopes;
  if (!csv::read_line(in, line)) return scopes;
  const auto header = csv::split_line(line);
  if (header.size() < 2 || header[0] != "scope" || header[1] != "tokens") fail("bad header");

  // column -> (lemma index, class)
  std::vector<Classification> columns;
  for (std::size_t c = 2; c < header.size(); ++c) {
    const auto& h = header[c];
    const auto dot = h.rfind('.');
    if (dot == std::string::npos) fail("bad column '" + h + "'");
    const auto lemma = lexicon.index_of(std::string_view(h).substr(0, dot));
    if (!lemma) fail("lemma in column '" + h + "' is not in the lexicon");
    const auto cls = h.substr(dot + 1);
    if (cls != "regular" && cls != "irregular") fail("bad column '" + h + "'");
    columns.push_back({*lemma, cls == "regular" ? FormClass::regular : FormClass::irregular});
  }

  while (csv::read_line(in, line)) {
    const auto cells = csv::split_line(line);
    if (cells.size() != header.size()) fail("row has wrong column count: " + line);
    PastTenseCounts counts(cells[0], lexicon.size());
    std::uint64_t tokens = 0;
    try {
      std::size_t used = 0;
      tokens = std::stoull(cells[1], &used);
      if (used != cells[1].size() || cells[1].front() == '-') throw std::invalid_argument("x");
    } catch (const std::exception&) {
      fail("bad token total '" + cells[1] + "'");
    }
    for (std::size_t c = 2; c < cells.size(); ++c) {
      std::uint64_t v = 0;
      try {
        std::size_t used = 0;
        v = std::stoull(cells[c], &used);
        if (used != cells[c].size() || cells[c].front() == '-') throw std::invalid_argument("x");
      } catch (const std::exception&) {
        fail("bad count '" + cells[c] + "'");
      }
      counts.add(columns[c - 2], v);
    }
    if (counts.total() != tokens) fail("token total disagrees with the cells for scope " + cells[0]);
    if (!scopes.emplace(cells[0], std::move(counts)).second) fail("duplicate scope " + cells[0]);
  }
  return scopes;
}

ScopeMap load_counts_csv(const std::filesystem::path& path, const Lexicon& lexicon) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::input, "cannot open " + path.string());
  return read_counts_csv(in, lexicon);
}

ScopeWeights to_weights(const PastTenseCounts& counts) {
  ScopeWeights w;
  w.scope_id = counts.scope_id;
  w.per_lemma.reserve(counts.per_lemma.size());
  for (const auto& v : counts.per_lemma)
    w.per_lemma.push_back({static_cast<double>(v.regular), static_cast<double>(v.irregular)});
  return w;
}

// ---------------------------------------------------------------------------
// Frequency series

std::optional<double> FrequencySeries::at(int year) const {
  const auto it = std::lower_bound(points.begin(), points.end(), year,
                                   [](const auto& p, int y) { return p.first < y; });
  if (it == points.end() || it->first != year) return std::nullopt;
  return it->second;
}

double smooth(const FrequencySeries& series, int s, int year) {
  if (s < 0) throw Error(ErrorKind::precondition, "smoothing window must be nonnegative");
  if (!series.at(year))
    throw Error(ErrorKind::precondition,
                "year " + std::to_string(year) + " absent from series '" + series.form + "'");
  double sum = 0.0;
  int n = 0;
  for (const auto& [y, v] : series.points) {
    if (y >= year - s && y <= year + s) {
      sum += v;
      ++n;
    }
  }
  return sum / n;
}

VerbWeights ngram_counts(const FrequencySeries& regular_series,
                         std::span<const FrequencySeries> irregular_series, int s, int year) {
  VerbWeights w;
  w.regular = smooth(regular_series, s, year);
  for (const auto& series : irregular_series) w.irregular += smooth(series, s, year);
  return w;
}

SeriesTable read_frequency_series(std::istream& in) {
  const auto fail = [](const std::string& m) -> void {
    throw Error(ErrorKind::input, "frequency series: " + m);
  };
  std::string line;
  if (!csv::read_line(in, line)) return {};
  const auto header = csv::split_line(line);
  if (header.size() != 3 || csv::trim(header[0]) != "form" || csv::trim(header[1]) != "year" ||
      csv::trim(header[2]) != "relative_frequency_percent")
    fail("bad header '" + line + "'");

  std::map<std::string, std::map<int, double>> folded;
  std::set<std::pair<std::string, int>> seen;
  while (csv::read_line(in, line)) {
    const auto cells = csv::split_line(line);
    if (cells.size() != 3) fail("bad row '" + line + "'");
    const std::string raw(csv::trim(cells[0]));
    if (raw.empty()) fail("empty form in '" + line + "'");
    int year = 0;
    double value = 0.0;
    try {
      std::size_t used = 0;
      const std::string y(csv::trim(cells[1]));
      year = std::stoi(y, &used);
      if (used != y.size()) throw std::invalid_argument(y);
      const std::string v(csv::trim(cells[2]));
      value = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
    } catch (const std::exception&) {
      fail("bad number in '" + line + "'");
    }
    if (!std::isfinite(value) || value < 0.0) fail("frequency must be finite and >= 0: '" + line + "'");
    if (!seen.emplace(raw, year).second)
      fail("duplicate year " + std::to_string(year) + " for '" + raw + "'");
    folded[csv::to_lower(raw)][year] += value;
  }

  SeriesTable table;
  for (auto& [form, years] : folded) {
    FrequencySeries s;
    s.form = form;
    s.points.assign(years.begin(), years.end());
    table.emplace(form, std::move(s));
  }
  return table;
}

SeriesTable load_frequency_series(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::input, "cannot open " + path.string());
  return read_frequency_series(in);
}

ScopeWeights ngram_weights(const SeriesTable& table, const Lexicon& lexicon, int s, int year,
                           std::string scope_id) {
  ScopeWeights out;
  out.scope_id = std::move(scope_id);
  out.per_lemma.resize(lexicon.size());
  const auto gather = [&](const std::set<std::string>& forms) {
    std::vector<FrequencySeries> series;
    for (const auto& f : forms)
      if (const auto it = table.find(f); it != table.end()) series.push_back(it->second);
    return series;
  };
  for (std::size_t i = 0; i < lexicon.size(); ++i) {
    const auto& e = lexicon[i];
    const auto regular = gather(e.regular_forms);
    const auto irregular = gather(e.irregular_forms());
    double reg = 0.0;
    for (const auto& r : regular) reg += smooth(r, s, year);
    double irr = 0.0;
    for (const auto& r : irregular) irr += smooth(r, s, year);
    out.per_lemma[i] = {reg, irr};
  }
  return out;
}

}  // namespace verbreg
