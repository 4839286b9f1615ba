#pragma once

#include <array>
#include <cstdint>

namespace potts {

// Philox4x32-10 counter-based generator.  Key = seed, the upper counter words hold the
// stream id, so (seed, stream) pairs give independent, reproducible sequences.
class Philox {
public:
    using Block = std::array<std::uint32_t, 4>;

    Philox(std::uint64_t seed = 0, std::uint64_t stream = 0);

    static Block bijection(Block ctr, std::array<std::uint32_t, 2> key);

    std::uint64_t next_u64();
    std::uint32_t next_u32();
    // Uniform on [0, 1) with 53 random bits.
    double uniform();
    // Uniform on (0, 1].
    double uniform_pos() { return 1.0 - uniform(); }
    // Uniform integer on [0, n), n > 0, by rejection (no modulo bias).
    std::uint64_t below(std::uint64_t n);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }
    std::uint64_t blocks_used() const { return counter_; }

private:
    void refill();

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    Block out_{};
    int pos_ = 4;
};

}  // namespace potts
