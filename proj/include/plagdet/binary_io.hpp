#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "plagdet/types.hpp"

namespace plagdet::detail {

// Little-endian helpers for the fixed-layout headers of .pemb / .phed files.

inline void put_u32(std::vector<char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline void put_f32(std::vector<char>& out, float f) {
  put_u32(out, std::bit_cast<std::uint32_t>(f));
}

inline std::uint32_t get_u32(std::span<const char> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  return v;
}

inline float get_f32(std::span<const char> bytes, std::size_t offset) {
  return std::bit_cast<float>(get_u32(bytes, offset));
}

inline std::vector<char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw ValidationError("read failure on '" + path + "'");
  return data;
}

inline void write_file(const std::string& path, std::span<const char> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw ValidationError("write failure on '" + path + "'");
}

inline void write_text(const std::string& path, std::string_view text) {
  write_file(path, std::span<const char>(text.data(), text.size()));
}

inline bool has_magic(std::span<const char> bytes, std::string_view magic) {
  return bytes.size() >= magic.size() && std::memcmp(bytes.data(), magic.data(), magic.size()) == 0;
}

}  // namespace plagdet::detail
