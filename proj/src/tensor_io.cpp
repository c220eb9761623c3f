#include "vcr/tensor_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "vcr/binary.hpp"

namespace vcr {

namespace {
constexpr char kMagic[4] = {'V', 'C', 'R', 'T'};
}

void write_tensor(std::ostream& os, const Tensor& t) {
  os.write(kMagic, 4);
  binary::put_u32(os, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t e : t.shape()) binary::put_u64(os, e);
  for (double v : t.values()) binary::put_f64(os, v);
  if (!os) throw IoError("failed to write tensor payload");
}

Tensor read_tensor(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError("not a tensor file (bad magic)");
  }
  const std::uint32_t rank = binary::get_u32(is);
  if (rank == 0 || rank > kMaxRank) throw IoError("tensor file has invalid rank " + std::to_string(rank));
  Shape shape(rank);
  std::uint64_t count = 1;
  for (auto& e : shape) {
    const std::uint64_t v = binary::get_u64(is);
    if (v == 0 || v > (std::uint64_t{1} << 32)) throw IoError("tensor file has invalid extent");
    e = static_cast<std::size_t>(v);
    count *= v;
    if (count > (std::uint64_t{1} << 34)) throw IoError("tensor file payload too large");
  }
  std::vector<double> data(static_cast<std::size_t>(count));
  for (double& v : data) v = binary::get_f64(is);
  return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_tensor(os, t);
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open tensor file " + path.string());
  try {
    return read_tensor(is);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace vcr
