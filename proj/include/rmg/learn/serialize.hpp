#pragma once

// RMGM model container, little-endian:
//   "RMGM" | u32 version | u32 len, arch tag | u32 len, config JSON
//   | u64 FNV-1a of the config JSON | u32 tensor count
//   | per tensor: u32 len, name | u32 ndim | u32 dims... | f32 data
//   | u64 FNV-1a of all preceding bytes

#include "rmg/learn/models.hpp"

#include <memory>
#include <string>
#include <string_view>

namespace rmg::learn {

inline constexpr std::uint32_t kModelFormatVersion = 1;

template <typename T>
std::string serialize_model(const Model<T>& model);

template <typename T>
std::unique_ptr<Model<T>> deserialize_model(std::string_view bytes);

}  // namespace rmg::learn
