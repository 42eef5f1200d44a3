#include "fmfusion/serialize.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace fmf {

namespace {

constexpr std::array<char, 8> kMagic = {'F', 'M', 'T', 'E', 'N', 'S', '0', '1'};
constexpr std::uint32_t kMaxRank = 16;
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 28;

void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                     static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  os.write(b, 4);
}

std::uint32_t get_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw FormatError(std::string("truncated tensor blob while reading ") + what);
  }
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& t) {
  os.write(kMagic.data(), kMagic.size());
  put_u32(os, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t e : t.shape()) put_u32(os, static_cast<std::uint32_t>(e));
  for (double v : t.data()) put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  if (!os) throw FormatError("failed writing tensor blob");
}

Tensor read_tensor(std::istream& is) {
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw FormatError("bad tensor magic; expected FMTENS01");
  }
  const std::uint32_t rank = get_u32(is, "rank");
  if (rank > kMaxRank) throw FormatError("implausible tensor rank " + std::to_string(rank));
  Shape shape(rank);
  std::uint64_t count = 1;
  for (auto& e : shape) {
    e = get_u32(is, "extent");
    count *= e;
    if (count > kMaxElements) throw FormatError("tensor blob declares too many elements");
  }
  Tensor t(shape);
  for (double& v : t.data()) v = static_cast<double>(std::bit_cast<float>(get_u32(is, "payload")));
  if (is.peek() != std::char_traits<char>::eof()) {
    throw FormatError("trailing bytes after tensor payload");
  }
  return t;
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  write_tensor(os, t);
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  return read_tensor(is);
}

std::vector<char> encode_tensor(const Tensor& t) {
  std::ostringstream os(std::ios::binary);
  write_tensor(os, t);
  const std::string s = os.str();
  return {s.begin(), s.end()};
}

Tensor decode_tensor(const std::vector<char>& bytes) {
  std::istringstream is(std::string(bytes.begin(), bytes.end()), std::ios::binary);
  return read_tensor(is);
}

}  // namespace fmf
