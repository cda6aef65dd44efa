#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "vrnnaug/nn.hpp"
#include "vrnnaug/tensor.hpp"

namespace vrnnaug {

/// Flat little-endian container of ordered (name, shape, values) records:
///   magic "VRNTNSR1", u32 record count, then per record
///   u32 name length, name bytes, u32 rank, u32 extents[rank], f64 values.
/// Doubles are stored bit-exactly, so save/load/save round-trips
/// byte-for-byte.
void write_tensor_records(
    const std::filesystem::path& path,
    const std::vector<std::pair<std::string, Tensor>>& records);

std::vector<std::pair<std::string, Tensor>> read_tensor_records(
    const std::filesystem::path& path);

void save_params(const ParamStore& store, const std::filesystem::path& path);

/// Loads values into an existing store; names, order and shapes must match.
void load_params(ParamStore& store, const std::filesystem::path& path);

}  // namespace vrnnaug
