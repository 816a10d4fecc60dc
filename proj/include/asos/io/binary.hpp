#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "asos/common.hpp"

namespace asos::io {

// Little-endian scalar I/O on streams. The host is assumed little-endian
// (x86/aarch64); a static check guards the assumption.
static_assert(static_cast<unsigned char>(0x0102 & 0xff) == 0x02);

template <typename T>
void write_le(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw DataError("unexpected end of binary stream");
  return v;
}

inline void write_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void read_bytes(std::istream& is, void* p, std::size_t n) {
  is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!is) throw DataError("unexpected end of binary stream");
}

template <typename T>
void write_le(std::string& out, T v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(const std::string& buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size())
    throw DataError("unexpected end of binary buffer");
  T v{};
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open file: " + path);
  f.seekg(0, std::ios::end);
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(f.tellg()));
  f.seekg(0);
  f.read(reinterpret_cast<char*>(buf.data()),
         static_cast<std::streamsize>(buf.size()));
  if (!f) throw DataError("short read: " + path);
  return buf;
}

inline std::string read_file_string(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open file: " + path);
  f.seekg(0, std::ios::end);
  std::string buf(static_cast<std::size_t>(f.tellg()), '\0');
  f.seekg(0);
  f.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw DataError("short read: " + path);
  return buf;
}

/// Write a file through a temporary sibling and rename, so readers never see
/// a partially written file.
inline void write_file_atomic(const std::string& path, const void* data,
                              std::size_t n) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open file for writing: " + tmp);
    f.write(reinterpret_cast<const char*>(data),
            static_cast<std::streamsize>(n));
    if (!f) throw DataError("short write: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw DataError("cannot rename " + tmp + " to " + path);
}

inline void write_file_atomic(const std::string& path,
                              const std::string& text) {
  write_file_atomic(path, text.data(), text.size());
}

}  // namespace asos::io
