#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace cvahedge {

// Philox4x32-10 (Salmon et al.), counter based: one stream per (seed, stream id).
class Philox4x32 {
public:
    using counter_type = std::array<std::uint32_t, 4>;
    using key_type = std::array<std::uint32_t, 2>;

    static counter_type block(counter_type ctr, key_type key)
    {
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
            key[0] += 0x9E3779B9u;
            key[1] += 0xBB67AE85u;
        }
        return ctr;
    }
};

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Stream of uniforms/normals/exponentials. Draws are a pure function of
// (seed, stream id, draw index), so paths can be generated in any order.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream_id)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_(stream_id)
    {
    }

    std::uint32_t next_u32()
    {
        if (pos_ == 4) {
            buf_ = Philox4x32::block({static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                                      static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
                                     key_);
            ++block_;
            pos_ = 0;
        }
        return buf_[pos_++];
    }

    // uniform on the open interval (0,1), 53 bits
    double uniform()
    {
        const std::uint64_t hi = next_u32() >> 5;
        const std::uint64_t lo = next_u32() >> 6;
        return (static_cast<double>((hi << 26) | lo) + 0.5) * 0x1.0p-53;
    }

    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double phi = 6.283185307179586476925 * u2;
        spare_ = r * std::sin(phi);
        has_spare_ = true;
        return r * std::cos(phi);
    }

    double exponential() { return -std::log(uniform()); }

    std::uint64_t stream_id() const { return stream_; }

    // independent child stream, e.g. for nested estimators
    RandomStream derive(std::uint64_t tag) const
    {
        const std::uint64_t seed = (std::uint64_t{key_[1]} << 32) | key_[0];
        return RandomStream(seed, splitmix64(stream_ ^ splitmix64(tag + block_ * 0x632BE59BD9B4E019ull + pos_)));
    }

private:
    Philox4x32::key_type key_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buf_{};
    int pos_ = 4;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace cvahedge
