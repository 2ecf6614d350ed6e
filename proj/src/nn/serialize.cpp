#include "poer/nn/serialize.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "poer/common/error.hpp"

namespace poer::nn {

namespace {

constexpr std::array<char, 4> kMagic{'P', 'O', 'E', 'R'};

template <typename T>
T to_little(T value) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    std::memcpy(&value, bytes, sizeof(T));
  }
  return value;
}

template <typename T>
void put(std::ostream& out, T value) {
  value = to_little(value);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw ConfigError("checkpoint truncated");
  return to_little(value);
}

}  // namespace

void write_tensors(std::ostream& out, std::span<const Tensor* const> tensors) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const Tensor* t : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t->rank()));
    for (auto d : t->shape()) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (double v : t->data()) put<double>(out, v);
  }
  if (!out) throw ConfigError("failed writing checkpoint");
}

std::vector<Tensor> read_tensors(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw ConfigError("not a POER checkpoint (bad magic)");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw ConfigError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = get<std::uint32_t>(in);
  std::vector<Tensor> tensors;
  tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto rank = get<std::uint32_t>(in);
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = get<std::uint32_t>(in);
    std::vector<double> data(shape_product(shape));
    for (auto& v : data) v = get<double>(in);
    tensors.emplace_back(std::move(shape), std::move(data));
  }
  return tensors;
}

void save_tensors(const std::filesystem::path& path, std::span<const Tensor* const> tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
  write_tensors(out, tensors);
}

std::vector<Tensor> load_tensors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  return read_tensors(in);
}

}  // namespace poer::nn
