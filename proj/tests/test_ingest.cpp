#include <doctest.h>

#include <algorithm>
#include <random>
#include <nlohmann/json.hpp>
#include <sstream>
#include <zlib.h>

#include "support.hpp"
#include "verbreg/error.hpp"
#include "verbreg/ingest.hpp"

using namespace verbreg;

namespace {

using Tokens = std::vector<std::string>;

const Scoper kOneScope = [](const Record&) { return std::optional<std::string>("all"); };

std::string record_line(const std::string& text, const std::string& scope) {
  nlohmann::json j = {{"text", text}, {"user_location", scope}};
  return j.dump();
}

CountResult count_text(const std::string& jsonl, std::size_t workers = 1, std::size_t batch = 2048) {
  std::istringstream in(jsonl);
  StreamLineSource source(in);
  CountOptions options;
  options.workers = workers;
  options.batch_lines = batch;
  return count_stream(source, testing::shipped_lexicon(), kOneScope, options);
}

VerbCounts lemma_counts(const CountResult& r, const std::string& scope, const std::string& lemma) {
  const auto& lex = testing::shipped_lexicon();
  return r.scopes.at(scope).per_lemma[*lex.index_of(lemma)];
}

}  // namespace

TEST_CASE("parse_record accepts the documented fields") {
  const auto r = parse_record(
      R"({"text":"i burnt it","geo":{"lat":44.5,"lon":-73.2},"user_location":"Burlington, VT","ts":"2013-01-01"})");
  REQUIRE(r);
  CHECK(r->text == "i burnt it");
  REQUIRE(r->geo);
  CHECK(r->geo->lat == 44.5);
  CHECK(r->geo->lon == -73.2);
  CHECK(r->user_location == "Burlington, VT");
  CHECK(r->timestamp == "2013-01-01");

  const auto bare = parse_record(R"({"text":"x","geo":null})");
  REQUIRE(bare);
  CHECK_FALSE(bare->geo);
  CHECK_FALSE(bare->user_location);
}

TEST_CASE("parse_record rejects malformed lines") {
  CHECK_FALSE(parse_record("{not json"));
  CHECK_FALSE(parse_record("[1,2]"));
  CHECK_FALSE(parse_record(R"({"geo":{"lat":1,"lon":2}})"));
  CHECK_FALSE(parse_record(R"({"text":5})"));
  CHECK_FALSE(parse_record(R"({"text":"x","geo":{"lat":"a","lon":2}})"));
  CHECK_FALSE(parse_record(R"({"text":"x","geo":{"lat":91,"lon":2}})"));
  CHECK_FALSE(parse_record(R"({"text":"x","user_location":7})"));
}

TEST_CASE("tokenize folds case and splits on punctuation") {
  CHECK(tokenize("He BURNT it!") == Tokens{"he", "burnt", "it"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("burnt-out, re-learnt") == Tokens{"burnt", "out", "re", "learnt"});
  CHECK(tokenize("#dreamt @spelt 2learnt") == Tokens{"dreamt", "spelt", "learnt"});
  CHECK(tokenize("don't 'quoted'") == Tokens{"don't", "quoted"});
  CHECK(tokenize("it\xE2\x80\x99s") == Tokens{"it's"});
  CHECK(tokenize("caf\xC3\xA9 burnt") == Tokens{"caf\xC3\xA9", "burnt"});
  CHECK(tokenize("burnt\xF0\x9F\x94\xA5spilt") == Tokens{"burnt", "spilt"});
}

TEST_CASE("count_stream tallies every occurrence per lemma and class") {
  const auto r = count_text(record_line("i burned it and he burnt it", "a") + "\n");
  CHECK(lemma_counts(r, "all", "burn") == VerbCounts{1, 1});
  CHECK(r.report.records_read == 1);
  CHECK(r.report.tokens_matched == 2);

  const auto upper = count_text(record_line("BURNED", "a") + "\n");
  CHECK(lemma_counts(upper, "all", "burn") == VerbCounts{1, 0});

  const auto twice = count_text(record_line("burnt burnt", "a") + "\n");
  CHECK(lemma_counts(twice, "all", "burn") == VerbCounts{0, 2});
}

TEST_CASE("count_stream on empty input yields an empty map") {
  const auto r = count_text("");
  CHECK(r.scopes.empty());
  CHECK(r.report.records_read == 0);
}

TEST_CASE("malformed lines are skipped and reported") {
  const auto r = count_text("{bad\n" + record_line("dreamt", "a") + "\n\n[]\n");
  CHECK(r.report.records_read == 3);
  CHECK(r.report.records_skipped == 2);
  CHECK(lemma_counts(r, "all", "dream") == VerbCounts{0, 1});
}

TEST_CASE("counts do not depend on worker count, batching or record order") {
  std::mt19937_64 rng(11);
  const auto& lex = testing::shipped_lexicon();
  std::vector<std::string> forms;
  for (const auto& e : lex.entries()) {
    forms.insert(forms.end(), e.regular_forms.begin(), e.regular_forms.end());
    for (const auto& f : e.irregular_forms()) forms.push_back(f);
  }
  forms.push_back("noise");
  std::vector<std::string> lines;
  for (int i = 0; i < 3000; ++i) {
    std::string text;
    const int n = static_cast<int>(rng() % 6);
    for (int k = 0; k < n; ++k) text += forms[rng() % forms.size()] + " ";
    lines.push_back(record_line(text, "s" + std::to_string(rng() % 4)));
  }
  const Scoper by_location = [](const Record& r) { return r.user_location; };
  const auto run = [&](const std::vector<std::string>& ls, std::size_t workers, std::size_t batch) {
    std::string all;
    for (const auto& l : ls) all += l + "\n";
    std::istringstream in(all);
    StreamLineSource src(in);
    return count_stream(src, lex, by_location, {workers, batch});
  };
  const auto base = run(lines, 1, 2048);
  auto shuffled = lines;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto other = run(shuffled, 4, 7);
  CHECK(base.scopes == other.scopes);
  CHECK(base.report == other.report);

  ScopeMap merged;
  for (int shard = 0; shard < 3; ++shard) {
    std::vector<std::string> part;
    for (std::size_t i = shard; i < lines.size(); i += 3) part.push_back(lines[i]);
    merge_into(merged, run(part, 2, 64).scopes);
  }
  CHECK(merged == base.scopes);
}

TEST_CASE("count_files reads plain and gzip files alike") {
  testing::TempDir dir("ingest");
  const std::string body = record_line("i learnt and learned", "x") + "\n";
  testing::spit(dir / "a.jsonl", body);
  {
    gzFile gz = gzopen((dir / "b.jsonl.gz").c_str(), "wb");
    gzwrite(gz, body.data(), static_cast<unsigned>(body.size()));
    gzclose(gz);
  }
  const std::vector<std::filesystem::path> paths{dir / "a.jsonl", dir / "b.jsonl.gz"};
  const auto r = count_files(paths, testing::shipped_lexicon(), kOneScope);
  CHECK(lemma_counts(r, "all", "learn") == VerbCounts{2, 2});
  const std::vector<std::filesystem::path> missing{dir / "nope.jsonl"};
  CHECK_THROWS_AS(count_files(missing, testing::shipped_lexicon(), kOneScope), Error);
}

TEST_CASE("counts CSV round-trips") {
  const auto& lex = testing::shipped_lexicon();
  ScopeMap scopes;
  scopes["50007"] = testing::make_counts("50007", {{"burn", 3, 1}, {"dream", 0, 4}});
  scopes["all"] = testing::make_counts("all", {{"get", 1, 100}});
  std::ostringstream out;
  write_counts_csv(out, scopes, lex);
  std::istringstream in(out.str());
  CHECK(read_counts_csv(in, lex) == scopes);
  std::istringstream bad("scope,tokens\nx,1\n");
  CHECK_THROWS_AS(read_counts_csv(bad, lex), Error);
}

TEST_CASE("smooth averages the available years in the window") {
  const FrequencySeries s{"x", {{1998, 1}, {1999, 2}, {2000, 3}, {2001, 4}, {2002, 5}}};
  CHECK(smooth(s, 1, 2000) == doctest::Approx(3.0));
  CHECK(smooth(s, 0, 1999) == doctest::Approx(2.0));
  CHECK(smooth(s, 0, 2002) == doctest::Approx(5.0));

  FrequencySeries tail{"y", {}};
  for (int y = 1990; y <= 2008; ++y) tail.points.emplace_back(y, y - 1990);
  CHECK(smooth(tail, 5, 2008) == doctest::Approx((13 + 14 + 15 + 16 + 17 + 18) / 6.0));
  CHECK_THROWS_AS(smooth(s, -1, 2000), Error);
}

TEST_CASE("ngram_counts sums the irregular series") {
  const FrequencySeries burned{"burned", {{2000, 0.004321}}};
  const std::vector<FrequencySeries> burnt{{"burnt", {{2000, 0.000954}}}};
  const auto w = ngram_counts(burned, burnt, 3, 2000);
  CHECK(w.regular == doctest::Approx(0.004321));
  CHECK(w.irregular == doctest::Approx(0.000954));

  const std::vector<FrequencySeries> two{{"a", {{2000, 0.001}}}, {"b", {{2000, 0.002}}}};
  CHECK(ngram_counts(burned, two, 0, 2000).irregular == doctest::Approx(0.003));
}

TEST_CASE("frequency series fold case variants together") {
  std::istringstream in(
      "form,year,relative_frequency_percent\nburnt,2000,0.001\nBurnt,2000,0.0005\nburned,2000,0.002\n");
  const auto table = read_frequency_series(in);
  const auto w = ngram_weights(table, testing::shipped_lexicon(), 0, 2000, "ngrams");
  const auto idx = *testing::shipped_lexicon().index_of("burn");
  CHECK(w.per_lemma[idx].regular == doctest::Approx(0.002));
  CHECK(w.per_lemma[idx].irregular == doctest::Approx(0.0015));

  std::istringstream dup("form,year,relative_frequency_percent\nburnt,2000,1\nburnt,2000,2\n");
  CHECK_THROWS_AS(read_frequency_series(dup), Error);
}
