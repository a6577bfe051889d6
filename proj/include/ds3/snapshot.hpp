#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "ds3/field.hpp"

// Binary field snapshots. Fixed 64-byte header: magic "DS3F", version u32,
// n1 n2 n3 u32, L1 L2 L3 f64, zero padding; then n1*n2*n3 complex samples as
// little-endian f64 (re, im) pairs, x3 fastest. The layout matches the
// in-memory field, so a round trip is bit-exact.

namespace ds3 {

static_assert(std::endian::native == std::endian::little,
              "snapshot format is little-endian");

inline constexpr std::uint32_t snapshot_version = 1;
inline constexpr std::size_t snapshot_header_bytes = 64;

inline void write_snapshot(const std::string& path, const ComplexField& f) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("snapshot: cannot open " + path + " for writing");
  unsigned char hdr[snapshot_header_bytes] = {0};
  std::memcpy(hdr, "DS3F", 4);
  std::uint32_t v = snapshot_version;
  std::memcpy(hdr + 4, &v, 4);
  std::uint32_t n[3] = {std::uint32_t(f.grid.n1), std::uint32_t(f.grid.n2),
                        std::uint32_t(f.grid.n3)};
  std::memcpy(hdr + 8, n, 12);
  double L[3] = {f.grid.L1, f.grid.L2, f.grid.L3};
  std::memcpy(hdr + 20, L, 24);
  out.write(reinterpret_cast<const char*>(hdr), sizeof hdr);
  out.write(reinterpret_cast<const char*>(f.v.data()),
            std::streamsize(f.v.size() * sizeof(cplx)));
  out.flush();
  if (!out) throw io_error("snapshot: write failed on " + path);
}

inline ComplexField read_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("snapshot: cannot open " + path);
  unsigned char hdr[snapshot_header_bytes];
  in.read(reinterpret_cast<char*>(hdr), sizeof hdr);
  if (in.gcount() != std::streamsize(sizeof hdr))
    throw io_error("snapshot: short header in " + path);
  if (std::memcmp(hdr, "DS3F", 4) != 0)
    throw io_error("snapshot: bad magic in " + path);
  std::uint32_t v;
  std::memcpy(&v, hdr + 4, 4);
  if (v != snapshot_version)
    throw io_error("snapshot: unsupported version in " + path);
  std::uint32_t n[3];
  std::memcpy(n, hdr + 8, 12);
  double L[3];
  std::memcpy(L, hdr + 20, 24);
  GridSpec g;
  try {
    g = GridSpec(int(n[0]), int(n[1]), int(n[2]), L[0], L[1], L[2]);
  } catch (const config_error& e) {
    throw io_error("snapshot: corrupt header in " + path + ": " + e.what());
  }
  ComplexField f(g);
  in.read(reinterpret_cast<char*>(f.v.data()),
          std::streamsize(f.v.size() * sizeof(cplx)));
  if (in.gcount() != std::streamsize(f.v.size() * sizeof(cplx)))
    throw io_error("snapshot: short payload in " + path);
  in.peek();
  if (!in.eof()) throw io_error("snapshot: trailing bytes in " + path);
  return f;
}

}  // namespace ds3
