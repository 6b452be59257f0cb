#pragma once

#include "edadecomp/feel_transformer.hpp"

#include <filesystem>
#include <iosfwd>

namespace edadecomp {

// Binary layout, all integers and floats little-endian:
//   8 bytes  magic "EDAFEEL\0"
//   u32      format version
//   u64 x 8  d_model n_heads ff_dim n_encoder n_decoder pool_kernel seq_len decomp_kernel
//   f64      autocorr_factor
//   u64      tensor count, then per tensor:
//            u32 name length, name bytes, u32 rank, u64 dims[rank], f64 values[prod(dims)]
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ModelParams& params, std::ostream& out);
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);

// Throws IoError on a truncated or foreign file and on a version, name or
// shape mismatch against the stored architecture.
ModelParams load_checkpoint(std::istream& in);
ModelParams load_checkpoint(const std::filesystem::path& path);

} // namespace edadecomp
