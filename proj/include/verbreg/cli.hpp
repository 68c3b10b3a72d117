#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace verbreg {

inline constexpr const char* kToolkitVersion = "0.3.0";

struct RunConfig {
  std::filesystem::path lexicon;
  std::vector<std::filesystem::path> corpus;
  std::filesystem::path gazetteer;
  std::filesystem::path counties;
  std::filesystem::path regions;
  std::filesystem::path counts;
  std::filesystem::path acs;
  std::filesystem::path ngrams;
  std::string mode = "all";
  std::string scope;
  std::string lemma;
  std::string fips_column = "GEO.id2";
  std::int64_t min_tokens_county = 40;
  std::int64_t min_tokens_verb = 10;
  std::int64_t fuzzy_confidence = 91;
  std::int64_t smoothing = 5;
  std::int64_t year = 2008;
  std::int64_t sizes = 1000;
  double size_min = 10.0;
  double size_max = 1e7;
  std::int64_t replicates = 5;
  double alpha = 0.05;
  bool t_subset = false;
  std::uint64_t seed = 0;
  std::int64_t workers = 1;
  std::filesystem::path out = ".";
};

// `key = value` lines; '#' starts a comment. Unknown keys are an error.
// `corpus` takes a comma-separated list.
std::map<std::string, std::string> parse_config_text(std::istream& in);
void apply_config(RunConfig& config, const std::map<std::string, std::string>& values);

// Canonical `key=value` text of the settings that affect results; the output
// directory is excluded so that reruns into another directory hash equally.
std::string canonical_config(const RunConfig& config);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

// Entry point for the `verbreg` tool. Returns the process exit code:
// 0 success, 1 internal, 2 config/usage, 3 input, 4 precondition, 5 degenerate.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace verbreg
