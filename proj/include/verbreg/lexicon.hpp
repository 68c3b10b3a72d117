#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace verbreg {

enum class FormClass : std::uint8_t { regular, irregular };

const char* to_string(FormClass c);

// One verb and its past-tense surface forms.
struct VerbEntry {
  std::string lemma;
  std::set<std::string> regular_forms;
  std::set<std::string> irregular_preterite;
  std::set<std::string> irregular_participle;
  bool t_subset = false;
  // Documentation only; never used in computation.
  std::uint64_t reference_token_count = 0;

  // Union of preterite and participle forms.
  std::set<std::string> irregular_forms() const;
};

struct Classification {
  std::size_t lemma_index;
  FormClass form_class;
};

// Immutable verb-form lexicon. Lemma indices are positions in entries() and
// are stable for the lifetime of the object; PastTenseCounts are keyed on them.
class Lexicon {
 public:
  // Validates every entry invariant and builds the form index.
  // Throws Error(input) on empty form sets, non-alphabetic or uppercase
  // forms, regular/irregular overlap, duplicate lemmas or cross-lemma
  // form collisions.
  explicit Lexicon(std::vector<VerbEntry> entries);

  const std::vector<VerbEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  const VerbEntry& operator[](std::size_t i) const { return entries_[i]; }

  // Exact whole-token lookup. The token must already be lowercase.
  std::optional<Classification> classify(std::string_view token) const;

  std::optional<std::size_t> index_of(std::string_view lemma) const;

  // Entries flagged as forming their irregular past with -t, in lexicon order.
  std::vector<VerbEntry> t_subset() const;

  std::size_t form_count() const noexcept { return form_index_.size(); }

 private:
  struct StringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept {
      return std::hash<std::string_view>{}(s);
    }
  };
  using Index = std::unordered_map<std::string, Classification, StringHash, std::equal_to<>>;

  std::vector<VerbEntry> entries_;
  Index form_index_;
  std::unordered_map<std::string, std::size_t, StringHash, std::equal_to<>> lemma_index_;
};

Lexicon parse_lexicon(std::istream& in);
Lexicon load_lexicon(const std::filesystem::path& path);
void write_lexicon(std::ostream& out, const Lexicon& lexicon);

// Free-function spellings of the lookup operations.
inline std::optional<Classification> classify_token(const Lexicon& lexicon,
                                                     std::string_view token) {
  return lexicon.classify(token);
}

inline std::vector<VerbEntry> t_subset(const Lexicon& lexicon) { return lexicon.t_subset(); }

// Path of the lexicon shipped with the toolkit.
std::filesystem::path default_lexicon_path();

}  // namespace verbreg
