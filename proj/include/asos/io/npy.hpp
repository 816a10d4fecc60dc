#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "asos/io/binary.hpp"
#include "asos/tensor.hpp"

namespace asos::io {

// Minimal NumPy .npy codec (format version 1.0, C-order, little-endian).
// Used as the plain binary array container for tiles, raw sensitivity
// fields and masks; files interoperate with numpy.load / numpy.save.

namespace detail {

template <typename T>
constexpr const char* npy_descr() {
  if constexpr (std::is_same_v<T, std::uint8_t>) return "|u1";
  else if constexpr (std::is_same_v<T, std::uint16_t>) return "<u2";
  else if constexpr (std::is_same_v<T, std::int32_t>) return "<i4";
  else if constexpr (std::is_same_v<T, float>) return "<f4";
  else if constexpr (std::is_same_v<T, double>) return "<f8";
  else static_assert(sizeof(T) == 0, "unsupported npy dtype");
}

inline std::string npy_header(const std::string& descr,
                              const std::vector<std::size_t>& shape) {
  std::ostringstream dict;
  dict << "{'descr': '" << descr << "', 'fortran_order': False, 'shape': (";
  for (std::size_t i = 0; i < shape.size(); ++i) dict << shape[i] << (shape.size() == 1 ? "," : i + 1 < shape.size() ? ", " : "");
  dict << "), }";
  std::string d = dict.str();
  // Pad so that magic(6)+version(2)+len(2)+dict is a multiple of 64.
  std::size_t unpadded = 10 + d.size() + 1;
  std::size_t padded = (unpadded + 63) / 64 * 64;
  d.append(padded - 10 - d.size() - 1, ' ');
  d.push_back('\n');
  std::string header = "\x93NUMPY";
  header.push_back(1);
  header.push_back(0);
  std::uint16_t len = static_cast<std::uint16_t>(d.size());
  header.push_back(static_cast<char>(len & 0xff));
  header.push_back(static_cast<char>(len >> 8));
  header += d;
  return header;
}

inline std::string dict_value(const std::string& dict, const std::string& key,
                              const std::string& path) {
  auto kpos = dict.find("'" + key + "'");
  if (kpos == std::string::npos)
    throw DataError("npy header missing key '" + key + "': " + path);
  auto colon = dict.find(':', kpos);
  auto end = dict.find_first_of(",}", colon);
  // shape tuples contain commas; scan to the closing parenthesis instead
  auto open = dict.find_first_not_of(" ", colon + 1);
  if (open != std::string::npos && dict[open] == '(') {
    end = dict.find(')', open) + 1;
    return dict.substr(open, end - open);
  }
  return dict.substr(colon + 1, end - colon - 1);
}

}  // namespace detail

template <typename T>
void save_npy(const std::string& path, const Tensor<T>& t) {
  std::string header = detail::npy_header(detail::npy_descr<T>(), t.shape());
  std::string blob = header;
  blob.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(T));
  write_file_atomic(path, blob);
}

template <typename T>
Tensor<T> load_npy(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open npy file: " + path);
  char magic[8];
  read_bytes(f, magic, 8);
  if (std::string(magic, 6) != "\x93NUMPY")
    throw DataError("not an npy file: " + path);
  if (magic[6] != 1)
    throw DataError("unsupported npy format version in " + path);
  std::uint16_t hlen = read_le<std::uint16_t>(f);
  std::string dict(hlen, '\0');
  read_bytes(f, dict.data(), hlen);

  std::string descr = detail::dict_value(dict, "descr", path);
  descr.erase(std::remove_if(descr.begin(), descr.end(),
                             [](char c) { return c == '\'' || c == ' '; }),
              descr.end());
  if (descr != detail::npy_descr<T>())
    throw DataError("npy dtype mismatch in " + path + ": file has " + descr +
                    ", expected " + detail::npy_descr<T>());
  std::string order = detail::dict_value(dict, "fortran_order", path);
  if (order.find("True") != std::string::npos)
    throw DataError("fortran-order npy not supported: " + path);

  std::string shp = detail::dict_value(dict, "shape", path);
  std::vector<std::size_t> shape;
  std::string num;
  for (char c : shp) {
    if (std::isdigit(static_cast<unsigned char>(c))) {
      num.push_back(c);
    } else if (!num.empty()) {
      shape.push_back(std::stoull(num));
      num.clear();
    }
  }
  if (shape.empty()) throw DataError("npy scalar arrays not supported: " + path);

  Tensor<T> t(shape);
  read_bytes(f, t.data(), t.size() * sizeof(T));
  return t;
}

}  // namespace asos::io
