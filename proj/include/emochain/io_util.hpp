#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <ostream>
#include <string>

namespace emochain::io {

// Little-endian binary primitives. Short reads throw std::runtime_error
// with an "unexpected end of file" message.
void write_u32(std::ostream& os, std::uint32_t v);
void write_f32(std::ostream& os, float v);
void write_f64(std::ostream& os, double v);
std::uint32_t read_u32(std::istream& is);
float read_f32(std::istream& is);
double read_f64(std::istream& is);
void read_exact(std::istream& is, char* buf, std::size_t n);

// Writes through a temp file in the same directory and renames into place,
// so a failure never leaves a partial output behind.
void atomic_write(const std::filesystem::path& path,
                  const std::function<void(std::ostream&)>& writer);

std::string read_file(const std::filesystem::path& path);

}  // namespace emochain::io
