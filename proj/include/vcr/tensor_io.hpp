#pragma once

#include <filesystem>
#include <iosfwd>

#include "vcr/tensor.hpp"

namespace vcr {

// Binary tensor container: "VCRT", u32 rank, rank x u64 extents, then the
// payload as little-endian f64 in row-major order.
void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace vcr
