#pragma once

#include <cstdint>

#include <gmpxx.h>

#include "amiagg/bytes.hpp"

namespace amiagg::detail {

void EnsureSodium();

// Big-endian, zero-padded to exactly `width` bytes. Throws if v does not fit.
Bytes MpzToBytes(const mpz_class& v, std::size_t width);
mpz_class MpzFromBytes(ByteView bytes);

}  // namespace amiagg::detail
