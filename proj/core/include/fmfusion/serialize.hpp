#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "fmfusion/tensor.hpp"

namespace fmf {

/// Malformed or truncated tensor blob.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// FMTENS01 blob: 8-byte magic "FMTENS01", u32 rank, rank x u32 extents, then
// the payload as little-endian IEEE-754 binary32 in row-major order.

void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

std::vector<char> encode_tensor(const Tensor& t);
Tensor decode_tensor(const std::vector<char>& bytes);

}  // namespace fmf
