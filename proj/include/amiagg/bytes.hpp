#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "amiagg/error.hpp"

namespace amiagg {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline ByteView AsBytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

inline void Append(Bytes& out, ByteView in) {
  out.insert(out.end(), in.begin(), in.end());
}

inline void AppendU8(Bytes& out, std::uint8_t v) { out.push_back(v); }

inline void AppendBE(Bytes& out, std::uint64_t v, std::size_t width) {
  for (std::size_t i = width; i-- > 0;) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

// Cursor over a received frame. Running past the end is a malformed frame.
class ByteReader {
 public:
  explicit ByteReader(ByteView data) : data_(data) {}

  std::uint64_t ReadBE(std::size_t width) {
    ByteView b = Take(width);
    std::uint64_t v = 0;
    for (std::uint8_t byte : b) v = (v << 8) | byte;
    return v;
  }
  std::uint8_t ReadU8() { return Take(1)[0]; }
  ByteView Take(std::size_t n) {
    if (n > data_.size() - pos_) {
      throw ProtocolError(ErrorCode::kMalformedFrame, "frame truncated");
    }
    ByteView out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  ByteView data_;
  std::size_t pos_ = 0;
};

std::string ToHex(ByteView data);

}  // namespace amiagg
