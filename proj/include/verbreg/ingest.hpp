#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "verbreg/lexicon.hpp"

namespace verbreg {

// ---------------------------------------------------------------------------
// Records

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
};

struct Record {
  std::string text;
  std::optional<GeoPoint> geo;
  std::optional<std::string> user_location;
  std::optional<std::string> timestamp;
};

// Parses one JSON-lines record: {"text": ..., "geo": {"lat": .., "lon": ..},
// "user_location": ..., "ts": ...}. Returns nullopt for anything malformed,
// including out-of-range coordinates and a missing or non-string text.
std::optional<Record> parse_record(std::string_view line);

// ---------------------------------------------------------------------------
// Tokenization

// Streams lowercase tokens out of UTF-8 text without allocating per token.
// ASCII letters are case-folded; Latin-1/Latin Extended letters are kept as
// word characters; ' and U+2019 are apostrophes, kept only inside a token.
// Everything else separates tokens.
class Tokenizer {
 public:
  explicit Tokenizer(std::string_view text) : text_(text) {}

  // Advances to the next token. The view is valid until the next call.
  bool next(std::string_view& token);

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::string buffer_;
};

std::vector<std::string> tokenize(std::string_view text);

// ---------------------------------------------------------------------------
// Counting

struct VerbCounts {
  std::uint64_t regular = 0;
  std::uint64_t irregular = 0;

  std::uint64_t total() const noexcept { return regular + irregular; }
  bool operator==(const VerbCounts&) const = default;
};

// Per-lemma tallies for one scope, indexed by Lexicon lemma index.
struct PastTenseCounts {
  std::string scope_id;
  std::vector<VerbCounts> per_lemma;

  PastTenseCounts() = default;
  PastTenseCounts(std::string scope, std::size_t lemma_count)
      : scope_id(std::move(scope)), per_lemma(lemma_count) {}

  void add(const Classification& c, std::uint64_t n = 1);
  // Componentwise sum; both sides must cover the same lemma count.
  PastTenseCounts& operator+=(const PastTenseCounts& other);
  std::uint64_t total() const noexcept;

  bool operator==(const PastTenseCounts&) const = default;
};

struct LoadReport {
  std::uint64_t records_read = 0;
  std::uint64_t records_skipped = 0;
  std::uint64_t tokens_matched = 0;

  LoadReport& operator+=(const LoadReport& other);
  bool operator==(const LoadReport&) const = default;
};

std::string to_json(const LoadReport& report);

using ScopeMap = std::map<std::string, PastTenseCounts>;

struct CountResult {
  ScopeMap scopes;
  LoadReport report;
};

// Maps a record to the scope it is tallied under, or nullopt to skip it.
using Scoper = std::function<std::optional<std::string>(const Record&)>;

struct CountOptions {
  // Worker threads; each owns a private tally merged at the end.
  std::size_t workers = 1;
  std::size_t batch_lines = 2048;
};

// Source of raw JSON lines.
class LineSource {
 public:
  virtual ~LineSource() = default;
  // Returns false at end of stream; throws Error(input) on read failure.
  virtual bool next(std::string& line) = 0;
};

// Reads plain or gzip-compressed files; compression is detected from content.
class FileLineSource final : public LineSource {
 public:
  explicit FileLineSource(const std::filesystem::path& path);
  ~FileLineSource() override;
  FileLineSource(const FileLineSource&) = delete;
  FileLineSource& operator=(const FileLineSource&) = delete;

  bool next(std::string& line) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class StreamLineSource final : public LineSource {
 public:
  explicit StreamLineSource(std::istream& in) : in_(in) {}
  bool next(std::string& line) override;

 private:
  std::istream& in_;
};

// Single pass over the source. Every lexicon form occurrence in a scoped
// record increments exactly one tally; malformed lines are counted and skipped.
CountResult count_stream(LineSource& source, const Lexicon& lexicon, const Scoper& scoper,
                         const CountOptions& options = {});

CountResult count_records(std::span<const Record> records, const Lexicon& lexicon,
                          const Scoper& scoper);

// Counts several files as shards of one stream.
CountResult count_files(std::span<const std::filesystem::path> paths, const Lexicon& lexicon,
                        const Scoper& scoper, const CountOptions& options = {});

void merge_into(ScopeMap& into, const ScopeMap& from);

// Wide CSV: `scope,tokens,<lemma>.regular,<lemma>.irregular,...`, one row per scope.
void write_counts_csv(std::ostream& out, const ScopeMap& scopes, const Lexicon& lexicon);
ScopeMap read_counts_csv(std::istream& in, const Lexicon& lexicon);
ScopeMap load_counts_csv(const std::filesystem::path& path, const Lexicon& lexicon);

// ---------------------------------------------------------------------------
// Weights: counts or relative frequencies, interchangeable for fractions.

struct VerbWeights {
  double regular = 0.0;
  double irregular = 0.0;
};

struct ScopeWeights {
  std::string scope_id;
  std::vector<VerbWeights> per_lemma;
};

ScopeWeights to_weights(const PastTenseCounts& counts);

// ---------------------------------------------------------------------------
// N-gram frequency series

struct FrequencySeries {
  std::string form;
  // (year, relative frequency in percent), years strictly increasing.
  std::vector<std::pair<int, double>> points;

  std::optional<double> at(int year) const;
};

// Mean of the values for the existing years in [year - s, year + s].
// Throws Error(precondition) when `year` itself is absent or s < 0.
double smooth(const FrequencySeries& series, int s, int year);

// Smoothed regular weight and the sum of smoothed irregular weights.
VerbWeights ngram_counts(const FrequencySeries& regular_series,
                         std::span<const FrequencySeries> irregular_series, int s, int year);

using SeriesTable = std::map<std::string, FrequencySeries>;

// CSV `form,year,relative_frequency_percent`. Forms are case-folded and
// case variants of the same form are summed per year; a repeated
// (form, year) pair with identical spelling is an error.
SeriesTable read_frequency_series(std::istream& in);
SeriesTable load_frequency_series(const std::filesystem::path& path);

// Applies ngram_counts lemma by lemma, summing over every listed form.
// Forms absent from the table contribute zero weight.
ScopeWeights ngram_weights(const SeriesTable& table, const Lexicon& lexicon, int s, int year,
                           std::string scope_id);

}  // namespace verbreg
