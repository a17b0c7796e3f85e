#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace permclt {

// Philox4x32-10 block function (Salmon et al., "Parallel random numbers: as
// easy as 1, 2, 3"). Pure function of (counter, key).
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) noexcept;

inline constexpr std::string_view rng_name = "philox4x32-10";

// Counter-based stream. The key is the 64-bit root seed; the upper two counter
// words hold the substream index and the lower two count blocks within it, so
// substreams (seed, i) and (seed, j) never overlap for i != j.
class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t stream) noexcept;

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream() const noexcept { return stream_; }

    std::uint32_t next_u32() noexcept {
        if (pos_ == 4) refill();
        return buf_[pos_++];
    }

    std::uint64_t next_u64() noexcept {
        const std::uint64_t hi = next_u32();
        const std::uint64_t lo = next_u32();
        return (hi << 32) | lo;
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform on the open interval (0, 1).
    double uniform_open() noexcept {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Unbiased integer in [0, bound), bound >= 1 (Lemire's multiply-shift
    // with rejection).
    std::uint32_t below(std::uint32_t bound) noexcept;

    // Standard normal via the Box-Muller transform; the second variate of each
    // pair is cached.
    double normal() noexcept;

    void fill_normal(std::span<double> out) noexcept {
        for (double& x : out) x = normal();
    }

private:
    void refill() noexcept;

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    PhiloxKey key_;
    PhiloxCounter buf_{};
    std::size_t pos_ = 4;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace permclt
