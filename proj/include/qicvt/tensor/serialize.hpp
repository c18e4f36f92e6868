#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "qicvt/tensor/tensor.hpp"

namespace qicvt {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Precision : std::uint8_t { kF32, kF64 };

// Little-endian layout: rank (u32), extents (u32 each), then raw IEEE floats.
// The element width is fixed by the containing format, not stored.
void write_tensor(std::ostream& os, const Tensor& t, Precision precision);
Tensor read_tensor(std::istream& is, Precision precision);

void write_u32(std::ostream& os, std::uint32_t v);
void write_u8(std::ostream& os, std::uint8_t v);
void write_f32(std::ostream& os, float v);
void write_f64(std::ostream& os, double v);
void write_string(std::ostream& os, const std::string& s);

std::uint32_t read_u32(std::istream& is);
std::uint8_t read_u8(std::istream& is);
float read_f32(std::istream& is);
double read_f64(std::istream& is);
std::string read_string(std::istream& is);

}  // namespace qicvt
