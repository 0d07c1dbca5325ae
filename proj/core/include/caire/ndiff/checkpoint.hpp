#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "caire/ndiff/array.hpp"
#include "caire/ndiff/params.hpp"

namespace caire::ndiff {

inline constexpr std::uint32_t kCheckpointVersion = 1;

using NamedArrays = std::vector<std::pair<std::string, Array>>;

// Layout: "CAIRECKP", u32 version, u32 count, then per array: u32 name
// length, name bytes, u32 rank, u64 dims, f64 values. Little-endian.

std::string serialize_arrays(const NamedArrays& arrays);
/// Throws Error on a bad magic, unknown version or truncated input.
NamedArrays deserialize_arrays(const std::string& bytes);

void save_arrays(const std::filesystem::path& path, const NamedArrays& arrays);
NamedArrays load_arrays(const std::filesystem::path& path);

NamedArrays param_values(const ParamStore& store);
/// Copies values into `store` by name. Every stored parameter must be present
/// with a matching shape.
void restore_params(ParamStore& store, const NamedArrays& arrays);

}  // namespace caire::ndiff
