#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace evoimpute::csv {

// RFC 4180 subset: comma separated, double-quoted fields may contain commas
// and doubled quotes. Embedded newlines are not supported.
std::vector<std::string> split_line(std::string_view line);

std::string quote(std::string_view field);

std::string join(const std::vector<std::string>& fields);

// Reads the next line, stripping a trailing '\r'. Returns false at EOF.
bool next_line(std::istream& in, std::string& line);

}  // namespace evoimpute::csv
