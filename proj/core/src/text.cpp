#include "edadecomp/text.hpp"

#include "edadecomp/errors.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

namespace edadecomp {

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc())
    throw InternalError("to_chars failed");
  return std::string(buf.data(), ptr);
}

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+')
    s.remove_prefix(1);
  if (s.empty())
    return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    return std::nullopt;
  return v;
}

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos)
    return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.emplace_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos)
      break;
    start = pos + 1;
  }
  return parts;
}

KeyValues parse_key_values(std::istream& in) {
  KeyValues kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#')
      continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    const auto key = trim(t.substr(0, eq));
    if (key.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    kv[std::string(key)] = std::string(trim(t.substr(eq + 1)));
  }
  return kv;
}

KeyValues read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open config " + path);
  return parse_key_values(in);
}

void write_key_values(std::ostream& out, const KeyValues& kv) {
  for (const auto& [k, v] : kv)
    out << k << '=' << v << '\n';
}

} // namespace edadecomp
