// src/binary_io.h

// Copyright 2026  The ctdnn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Little-endian field readers/writers shared by the binary file formats.

#ifndef CTDNN_BINARY_IO_H_
#define CTDNN_BINARY_IO_H_

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "ctdnn/errors.h"

namespace ctdnn::binary {

template <typename U>
void put_uint(std::ostream &out, U value) {
  std::array<char, sizeof(U)> bytes;
  for (std::size_t i = 0; i < sizeof(U); ++i)
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  out.write(bytes.data(), bytes.size());
}

inline void put_f32(std::ostream &out, float v) {
  put_uint(out, std::bit_cast<std::uint32_t>(v));
}
inline void put_f64(std::ostream &out, double v) {
  put_uint(out, std::bit_cast<std::uint64_t>(v));
}

/// Reads fields while tracking the byte offset for error messages.
class Reader {
 public:
  explicit Reader(std::istream &in) : in_(in) {}

  std::size_t offset() const { return offset_; }

  void bytes(char *dst, std::size_t n, const char *what) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      throw FormatError(offset_ + static_cast<std::size_t>(in_.gcount()),
                        std::string("truncated while reading ") + what);
    offset_ += n;
  }

  template <typename U>
  U uint(const char *what) {
    std::array<unsigned char, sizeof(U)> b;
    bytes(reinterpret_cast<char *>(b.data()), b.size(), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
    return v;
  }

  float f32(const char *what) { return std::bit_cast<float>(uint<std::uint32_t>(what)); }
  double f64(const char *what) { return std::bit_cast<double>(uint<std::uint64_t>(what)); }

  std::string string(std::size_t n, const char *what) {
    std::string s(n, '\0');
    if (n) bytes(s.data(), n, what);
    return s;
  }

  /// True if the stream has no further bytes.
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream &in_;
  std::size_t offset_ = 0;
};

}  // namespace ctdnn::binary

#endif  // CTDNN_BINARY_IO_H_
