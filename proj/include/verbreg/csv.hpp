#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace verbreg::csv {

// Splits one CSV record. Double-quoted fields may contain commas and
// doubled quotes; embedded newlines are not supported.
std::vector<std::string> split_line(std::string_view line);

// Reads the next non-blank line, stripping a trailing '\r'. Returns false at EOF.
bool read_line(std::istream& in, std::string& line);

// Quotes a field when it contains a comma, quote or leading/trailing space.
std::string quote(std::string_view field);

std::string_view trim(std::string_view s);

std::string to_lower(std::string_view s);

}  // namespace verbreg::csv
