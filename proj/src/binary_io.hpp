#pragma once

#include "proxyjoin/types.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

// Little-endian primitives for the checkpoint, store and index files.
namespace proxyjoin::binio {

template <typename UInt>
void put_uint(std::ostream& out, UInt v) {
  unsigned char buf[sizeof(UInt)];
  for (std::size_t i = 0; i < sizeof(UInt); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), sizeof(UInt));
}

template <typename UInt>
UInt get_uint(std::istream& in) {
  unsigned char buf[sizeof(UInt)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(UInt))) throw IoError("truncated file");
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(buf[i]) << (8 * i);
  return v;
}

inline void put_u32(std::ostream& out, std::uint32_t v) { put_uint(out, v); }
inline void put_u64(std::ostream& out, std::uint64_t v) { put_uint(out, v); }
inline std::uint32_t get_u32(std::istream& in) { return get_uint<std::uint32_t>(in); }
inline std::uint64_t get_u64(std::istream& in) { return get_uint<std::uint64_t>(in); }

inline void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }
inline double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }
inline void put_f32(std::ostream& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
inline float get_f32(std::istream& in) { return std::bit_cast<float>(get_u32(in)); }

inline void put_magic(std::ostream& out, const char (&magic)[5]) { out.write(magic, 4); }

inline void expect_magic(std::istream& in, const char (&magic)[5]) {
  char buf[4];
  if (!in.read(buf, 4)) throw IoError("truncated file");
  if (std::memcmp(buf, magic, 4) != 0) throw Error(std::string("bad magic, expected ") + magic);
}

inline void expect_version(std::istream& in, std::uint32_t want) {
  const auto v = get_u32(in);
  if (v != want) throw Error("unsupported version " + std::to_string(v));
}

}  // namespace proxyjoin::binio
