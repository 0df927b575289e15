#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace cvahedge {

constexpr std::size_t max_names = 20;

// z_i = 1 means name i has defaulted. Name indices are 0-based; the
// counterparty is always the last name.
class DefaultState {
public:
    DefaultState() = default;
    explicit DefaultState(std::size_t n_names, std::uint32_t bits = 0) : n_(n_names), bits_(bits)
    {
        if (n_names == 0 || n_names > max_names)
            throw std::invalid_argument("DefaultState: name count must be in 1.." + std::to_string(max_names));
        if (bits >> n_names)
            throw std::invalid_argument("DefaultState: bits outside name range");
    }

    std::size_t size() const { return n_; }
    std::uint32_t bits() const { return bits_; }
    bool defaulted(std::size_t i) const { return (bits_ >> i) & 1u; }
    int popcount() const { return std::popcount(bits_); }
    bool all_defaulted() const { return popcount() == static_cast<int>(n_); }

    DefaultState flip(std::size_t j) const
    {
        if (j >= n_)
            throw std::out_of_range("DefaultState::flip: index " + std::to_string(j) + " out of range");
        DefaultState out = *this;
        out.bits_ ^= (1u << j);
        return out;
    }

    // componentwise z <= other
    bool below(const DefaultState& other) const { return (bits_ & ~other.bits_) == 0; }

    std::string str() const
    {
        std::string s(n_, '0');
        for (std::size_t i = 0; i < n_; ++i)
            if (defaulted(i)) s[i] = '1';
        return s;
    }

    friend bool operator==(const DefaultState& a, const DefaultState& b)
    {
        return a.n_ == b.n_ && a.bits_ == b.bits_;
    }

private:
    std::size_t n_ = 0;
    std::uint32_t bits_ = 0;
};

inline DefaultState flip_state(const DefaultState& z, std::size_t j) { return z.flip(j); }

}  // namespace cvahedge
