#include "edadecomp/checkpoint.hpp"

#include "edadecomp/errors.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace edadecomp {

namespace {

constexpr std::array<char, 8> kMagic{'E', 'D', 'A', 'F', 'E', 'E', 'L', '\0'};
constexpr std::size_t kMaxNameLength = 256;
constexpr std::size_t kMaxRank = 4;

template <typename T> void put(std::ostream& out, T v) {
  std::array<unsigned char, sizeof(T)> b;
  std::memcpy(b.data(), &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(b.begin(), b.end());
  out.write(reinterpret_cast<const char*>(b.data()), sizeof(T));
}

template <typename T> T get(std::istream& in) {
  std::array<unsigned char, sizeof(T)> b;
  if (!in.read(reinterpret_cast<char*>(b.data()), sizeof(T)))
    throw IoError("checkpoint truncated");
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(b.begin(), b.end());
  T v;
  std::memcpy(&v, b.data(), sizeof(T));
  return v;
}

std::string shape_string(const std::vector<std::size_t>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i)
    out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

} // namespace

void save_checkpoint(const ModelParams& params, std::ostream& out) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  const auto& a = params.arch;
  for (std::size_t v : {a.d_model, a.n_heads, a.ff_dim, a.n_encoder, a.n_decoder, a.pool_kernel, a.seq_len,
                        a.decomp_kernel})
    put<std::uint64_t>(out, v);
  put<double>(out, a.autocorr_factor);
  put<std::uint64_t>(out, params.tensors.size());
  for (const auto& [name, t] : params.tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape().size()));
    for (std::size_t d : t.shape())
      put<std::uint64_t>(out, d);
    for (double v : t.values())
      put<double>(out, v);
  }
  if (!out)
    throw IoError("failed to write checkpoint");
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot open '" + path.string() + "' for writing");
  save_checkpoint(params, out);
}

ModelParams load_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic)
    throw IoError("not a model checkpoint");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                  std::to_string(kCheckpointVersion) + ")");

  ModelParams p;
  auto& a = p.arch;
  for (std::size_t* f : {&a.d_model, &a.n_heads, &a.ff_dim, &a.n_encoder, &a.n_decoder, &a.pool_kernel,
                         &a.seq_len, &a.decomp_kernel})
    *f = static_cast<std::size_t>(get<std::uint64_t>(in));
  a.autocorr_factor = get<double>(in);
  try {
    a.validate();
  } catch (const ConfigError& e) {
    throw IoError(std::string("checkpoint architecture invalid: ") + e.what());
  }

  const auto expected = parameter_shapes(a);
  const auto count = get<std::uint64_t>(in);
  if (count != expected.size())
    throw IoError("checkpoint has " + std::to_string(count) + " tensors, architecture needs " +
                  std::to_string(expected.size()));
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(in);
    if (len == 0 || len > kMaxNameLength)
      throw IoError("checkpoint tensor name length " + std::to_string(len) + " out of range");
    std::string name(len, '\0');
    if (!in.read(name.data(), len))
      throw IoError("checkpoint truncated");
    const auto it = expected.find(name);
    if (it == expected.end())
      throw IoError("unexpected tensor '" + name + "' in checkpoint");
    const auto rank = get<std::uint32_t>(in);
    if (rank > kMaxRank)
      throw IoError("tensor '" + name + "' has rank " + std::to_string(rank));
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape)
      d = static_cast<std::size_t>(get<std::uint64_t>(in));
    if (shape != it->second)
      throw IoError("tensor '" + name + "' has shape " + shape_string(shape) + ", expected " +
                    shape_string(it->second));
    std::vector<double> values(ad::shape_numel(shape));
    for (double& v : values)
      v = get<double>(in);
    if (!p.tensors.emplace(name, ad::parameter(shape, std::move(values), name)).second)
      throw IoError("duplicate tensor '" + name + "' in checkpoint");
  }
  return p;
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open checkpoint '" + path.string() + "'");
  return load_checkpoint(in);
}

} // namespace edadecomp
