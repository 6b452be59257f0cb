#include "edadecomp/errors.hpp"
#include "edadecomp/text.hpp"

#include <doctest.h>

#include <limits>
#include <sstream>

using namespace edadecomp;

TEST_SUITE("text") {

TEST_CASE("format_double round-trips exactly") {
  for (double v : {0.0, 1.0, -2.5, 0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, std::numeric_limits<double>::max()}) {
    const auto s = format_double(v);
    REQUIRE(parse_double(s));
    CHECK(*parse_double(s) == v);
  }
}

TEST_CASE("parse_double is strict") {
  CHECK_FALSE(parse_double(""));
  CHECK_FALSE(parse_double("1.0x"));
  CHECK_FALSE(parse_double("abc"));
  CHECK(parse_double("-3e2").value() == -300.0);
}

TEST_CASE("key=value parsing") {
  std::istringstream in("# comment\n\nalpha = 1\nbeta=two words \n alpha=3\n");
  const auto kv = parse_key_values(in);
  CHECK(kv.size() == 2);
  CHECK(kv.at("alpha") == "3");
  CHECK(kv.at("beta") == "two words");

  std::istringstream bad("alpha = 1\nno equals sign\n");
  try {
    parse_key_values(bad);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
}

TEST_CASE("key=value write then parse is the identity") {
  KeyValues kv{{"a", "1"}, {"b", "x,y"}, {"c", "-0.25"}};
  std::ostringstream out;
  write_key_values(out, kv);
  std::istringstream in(out.str());
  CHECK(parse_key_values(in) == kv);
}

TEST_CASE("split keeps empty fields") {
  const auto parts = split("a,,b,", ',');
  REQUIRE(parts.size() == 4);
  CHECK(parts[1].empty());
  CHECK(parts[3].empty());
}

}
