#pragma once

#include <cstdint>

namespace amiagg {

// Per-thread tallies of the expensive primitives. The simulator snapshots
// these around each timed phase to fill TimingRecord operation counts.
struct OpCounts {
  std::uint64_t point_adds = 0;
  std::uint64_t scalar_muls = 0;
  std::uint64_t modexps = 0;

  OpCounts& operator+=(const OpCounts& o) {
    point_adds += o.point_adds;
    scalar_muls += o.scalar_muls;
    modexps += o.modexps;
    return *this;
  }
  friend OpCounts operator-(OpCounts a, const OpCounts& b) {
    a.point_adds -= b.point_adds;
    a.scalar_muls -= b.scalar_muls;
    a.modexps -= b.modexps;
    return a;
  }
  friend bool operator==(const OpCounts&, const OpCounts&) = default;
};

OpCounts& ThreadOpCounts();

}  // namespace amiagg
