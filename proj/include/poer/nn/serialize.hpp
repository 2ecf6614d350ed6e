#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "poer/nn/tensor.hpp"

namespace poer::nn {

// Binary checkpoint layout (little-endian):
//   "POER" | u32 version | u32 tensor_count |
//   per tensor: u32 rank | u32 dims[rank] | f64 data[prod(dims)] (row-major)
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_tensors(std::ostream& out, std::span<const Tensor* const> tensors);
std::vector<Tensor> read_tensors(std::istream& in);

void save_tensors(const std::filesystem::path& path, std::span<const Tensor* const> tensors);
std::vector<Tensor> load_tensors(const std::filesystem::path& path);

}  // namespace poer::nn
