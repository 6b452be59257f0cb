#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace edadecomp {

// Shortest representation that parses back to the same double.
std::string format_double(double v);

// Strict parse: whole string must be a number. nullopt otherwise.
std::optional<double> parse_double(std::string_view s);

std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

// Flat `key = value` configuration. '#' starts a comment line; blank lines are
// skipped. Duplicate keys keep the last value.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::istream& in);
KeyValues read_key_values(const std::string& path);
void write_key_values(std::ostream& out, const KeyValues& kv);

} // namespace edadecomp
