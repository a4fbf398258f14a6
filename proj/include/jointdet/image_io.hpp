#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "jointdet/tensor.hpp"

namespace jointdet {

/// Round [0,1] values to the 8-bit levels a PNG round trip would produce.
Tensor3 quantize8(const Tensor3& t);

/// Write a 1- or 3-channel tensor as an 8-bit PNG.
void write_png(const std::filesystem::path& path, const Tensor3& pixels);

/// Read an 8-bit gray or RGB PNG into [0,1] doubles.
Tensor3 read_png(const std::filesystem::path& path);

/// FNV-1a 64-bit hash, chainable through `basis`.
std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t hash_file(const std::filesystem::path& path, std::uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace jointdet
