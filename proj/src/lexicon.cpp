#include "verbreg/lexicon.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

#include "verbreg/csv.hpp"
#include "verbreg/error.hpp"

#ifndef VERBREG_DATA_DIR
#define VERBREG_DATA_DIR "data"
#endif

namespace verbreg {

namespace {

constexpr std::string_view kHeader =
    "lemma,regular,irregular_preterite,irregular_participle,t_subset,ref_count";

bool is_lower_alpha(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c < 'a' || c > 'z') return false;
  return true;
}

std::set<std::string> parse_forms(std::string_view cell) {
  std::set<std::string> forms;
  std::size_t start = 0;
  while (start <= cell.size()) {
    std::size_t end = cell.find(';', start);
    if (end == std::string_view::npos) end = cell.size();
    const auto form = csv::trim(cell.substr(start, end - start));
    if (!form.empty()) forms.emplace(form);
    start = end + 1;
  }
  return forms;
}

std::string join_forms(const std::set<std::string>& forms) {
  std::string out;
  for (const auto& f : forms) {
    if (!out.empty()) out.push_back(';');
    out += f;
  }
  return out;
}

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorKind::input, "lexicon: " + msg); }

}  // namespace

const char* to_string(FormClass c) { return c == FormClass::regular ? "regular" : "irregular"; }

std::set<std::string> VerbEntry::irregular_forms() const {
  std::set<std::string> all = irregular_preterite;
  all.insert(irregular_participle.begin(), irregular_participle.end());
  return all;
}

Lexicon::Lexicon(std::vector<VerbEntry> entries) : entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const VerbEntry& e = entries_[i];
    if (!is_lower_alpha(e.lemma)) fail("lemma '" + e.lemma + "' is not lowercase alphabetic");
    if (!lemma_index_.emplace(e.lemma, i).second) fail("duplicate lemma '" + e.lemma + "'");
    if (e.regular_forms.empty()) fail("'" + e.lemma + "' has no regular forms");
    const auto irregular = e.irregular_forms();
    if (irregular.empty()) fail("'" + e.lemma + "' has no irregular forms");

    const auto add = [&](const std::string& form, FormClass cls) {
      if (!is_lower_alpha(form))
        fail("form '" + form + "' of '" + e.lemma + "' is not lowercase alphabetic");
      auto [it, inserted] = form_index_.try_emplace(form, Classification{i, cls});
      if (inserted) return;
      if (it->second.lemma_index != i)
        fail("form '" + form + "' listed under both '" + entries_[it->second.lemma_index].lemma +
             "' and '" + e.lemma + "'");
      fail("form '" + form + "' of '" + e.lemma + "' is both regular and irregular");
    };
    for (const auto& f : e.regular_forms) add(f, FormClass::regular);
    for (const auto& f : irregular) add(f, FormClass::irregular);
  }
}

std::optional<Classification> Lexicon::classify(std::string_view token) const {
  const auto it = form_index_.find(token);
  if (it == form_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> Lexicon::index_of(std::string_view lemma) const {
  const auto it = lemma_index_.find(lemma);
  if (it == lemma_index_.end()) return std::nullopt;
  return it->second;
}

std::vector<VerbEntry> Lexicon::t_subset() const {
  std::vector<VerbEntry> out;
  for (const auto& e : entries_)
    if (e.t_subset) out.push_back(e);
  return out;
}

Lexicon parse_lexicon(std::istream& in) {
  std::string line;
  if (!csv::read_line(in, line)) fail("empty file");
  if (csv::trim(line) != kHeader) fail("unexpected header '" + line + "'");

  std::vector<VerbEntry> entries;
  std::size_t line_no = 1;
  while (csv::read_line(in, line)) {
    ++line_no;
    const auto cells = csv::split_line(line);
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (cells.size() != 6) fail(where + "expected 6 columns, got " + std::to_string(cells.size()));

    VerbEntry e;
    e.lemma = std::string(csv::trim(cells[0]));
    e.regular_forms = parse_forms(cells[1]);
    e.irregular_preterite = parse_forms(cells[2]);
    e.irregular_participle = parse_forms(cells[3]);

    const auto flag = csv::trim(cells[4]);
    if (flag == "1" || flag == "true")
      e.t_subset = true;
    else if (flag == "0" || flag == "false" || flag.empty())
      e.t_subset = false;
    else
      fail(where + "bad t_subset flag '" + std::string(flag) + "'");

    const std::string count(csv::trim(cells[5]));
    if (!count.empty()) {
      std::size_t used = 0;
      try {
        e.reference_token_count = std::stoull(count, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != count.size() || count.front() == '-')
        fail(where + "bad ref_count '" + count + "'");
    }
    entries.push_back(std::move(e));
  }
  return Lexicon(std::move(entries));
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::input, "lexicon: cannot open " + path.string());
  return parse_lexicon(in);
}

void write_lexicon(std::ostream& out, const Lexicon& lexicon) {
  out << kHeader << '\n';
  for (const auto& e : lexicon.entries()) {
    out << e.lemma << ',' << join_forms(e.regular_forms) << ',' << join_forms(e.irregular_preterite)
        << ',' << join_forms(e.irregular_participle) << ',' << (e.t_subset ? 1 : 0) << ','
        << e.reference_token_count << '\n';
  }
}

std::filesystem::path default_lexicon_path() {
  return std::filesystem::path(VERBREG_DATA_DIR) / "lexicon.csv";
}

}  // namespace verbreg
