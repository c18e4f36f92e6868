#include "qicvt/tensor/serialize.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>

namespace qicvt {

namespace {

template <typename U>
void put_le(std::ostream& os, U v) {
  std::array<char, sizeof(U)> bytes{};
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(bytes.data(), bytes.size());
  if (!os) throw FormatError("write failed");
}

template <typename U>
U get_le(std::istream& is) {
  std::array<unsigned char, sizeof(U)> bytes{};
  is.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (is.gcount() != static_cast<std::streamsize>(bytes.size())) throw FormatError("unexpected end of data");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[i]) << (8 * i);
  return v;
}

constexpr std::uint32_t kMaxRank = 8;

}  // namespace

void write_u32(std::ostream& os, std::uint32_t v) { put_le(os, v); }
void write_u8(std::ostream& os, std::uint8_t v) { put_le(os, v); }
void write_f32(std::ostream& os, float v) { put_le(os, std::bit_cast<std::uint32_t>(v)); }
void write_f64(std::ostream& os, double v) { put_le(os, std::bit_cast<std::uint64_t>(v)); }

void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::istream& is) { return get_le<std::uint32_t>(is); }
std::uint8_t read_u8(std::istream& is) { return get_le<std::uint8_t>(is); }
float read_f32(std::istream& is) { return std::bit_cast<float>(get_le<std::uint32_t>(is)); }
double read_f64(std::istream& is) { return std::bit_cast<double>(get_le<std::uint64_t>(is)); }

std::string read_string(std::istream& is) {
  const std::uint32_t n = read_u32(is);
  if (n > (1u << 20)) throw FormatError("string length " + std::to_string(n) + " is implausible");
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (is.gcount() != static_cast<std::streamsize>(n)) throw FormatError("unexpected end of data");
  return s;
}

void write_tensor(std::ostream& os, const Tensor& t, Precision precision) {
  write_u32(os, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t e : t.shape()) {
    if (e > std::numeric_limits<std::uint32_t>::max()) throw FormatError("extent exceeds u32");
    write_u32(os, static_cast<std::uint32_t>(e));
  }
  for (double v : t.values()) {
    if (precision == Precision::kF32) {
      write_f32(os, static_cast<float>(v));
    } else {
      write_f64(os, v);
    }
  }
}

Tensor read_tensor(std::istream& is, Precision precision) {
  const std::uint32_t rank = read_u32(is);
  if (rank == 0 || rank > kMaxRank) throw FormatError("tensor rank " + std::to_string(rank) + " unsupported");
  Shape shape(rank);
  std::size_t n = 1;
  for (auto& e : shape) {
    e = read_u32(is);
    n *= e;
    if (n > (std::size_t{1} << 28)) throw FormatError("tensor too large");
  }
  std::vector<double> data(n);
  for (auto& v : data) v = precision == Precision::kF32 ? read_f32(is) : read_f64(is);
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace qicvt
