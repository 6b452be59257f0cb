#include "edadecomp/checkpoint.hpp"
#include "edadecomp/errors.hpp"

#include <doctest.h>

#include <cstring>
#include <sstream>

using namespace edadecomp;

namespace {

std::string serialised(const ModelParams& p) {
  std::ostringstream out(std::ios::binary);
  save_checkpoint(p, out);
  return out.str();
}

ModelParams parse(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return load_checkpoint(in);
}

} // namespace

TEST_SUITE("checkpoint") {

TEST_CASE("round trip is bitwise") {
  for (const auto& arch : {toy_config(), feel_config(1)}) {
    const auto p = init_params(arch, 3);
    const auto q = parse(serialised(p));
    CHECK(q.arch == p.arch);
    REQUIRE(q.tensors.size() == p.tensors.size());
    for (const auto& [name, t] : p.tensors) {
      const auto& u = q.tensors.at(name);
      CHECK(u.shape() == t.shape());
      CHECK(std::memcmp(u.values().data(), t.values().data(), t.numel() * sizeof(double)) == 0);
    }
    CHECK(serialised(q) == serialised(p));
  }
}

TEST_CASE("header layout") {
  const auto bytes = serialised(init_params(toy_config(), 0));
  CHECK(bytes.substr(0, 8) == std::string("EDAFEEL\0", 8));
  std::uint32_t version = 0;
  std::memcpy(&version, bytes.data() + 8, 4);
  CHECK(version == kCheckpointVersion);
  std::uint64_t d_model = 0;
  std::memcpy(&d_model, bytes.data() + 12, 8);
  CHECK(d_model == toy_config().d_model);
}

TEST_CASE("foreign, old and truncated files are rejected") {
  const auto bytes = serialised(init_params(toy_config(), 0));
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(parse(bad), IoError);

  bad = bytes;
  bad[8] = 2;
  CHECK_THROWS_WITH_AS(parse(bad), doctest::Contains("version"), IoError);

  for (std::size_t cut : {std::size_t{4}, std::size_t{40}, bytes.size() / 2, bytes.size() - 1})
    CHECK_THROWS_AS(parse(bytes.substr(0, cut)), IoError);
  CHECK_THROWS_AS(parse(""), IoError);
}

TEST_CASE("shape mismatch against the stored architecture") {
  auto bytes = serialised(init_params(toy_config(), 0));
  // Claim d_model = 4 while tensors are stored for 8.
  const std::uint64_t d = 4;
  std::memcpy(bytes.data() + 12, &d, 8);
  CHECK_THROWS_AS(parse(bytes), IoError);
}

TEST_CASE("invalid architecture fields") {
  auto bytes = serialised(init_params(toy_config(), 0));
  const std::uint64_t even = 8; // pool kernel
  std::memcpy(bytes.data() + 12 + 5 * 8, &even, 8);
  CHECK_THROWS_AS(parse(bytes), IoError);
}

TEST_CASE("missing file") {
  CHECK_THROWS_AS(load_checkpoint(std::filesystem::path("/nonexistent/model.ckpt")), IoError);
}

}
