#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace jumpopt {

/// Independent substreams drawn for one simulated path.
enum class Stream : std::uint64_t {
    chain = 1,
    marks = 2,
    policy = 3,  // randomized test policies
};

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace detail

/// Counter-based SplitMix64 stream. The key is derived from (seed, path index,
/// stream id); output n is mix64(key + (n+1)*golden). Two streams with distinct
/// keys never share state, so paths can be simulated in any order or in
/// parallel and still reproduce bit-for-bit.
class CounterRng {
public:
    using result_type = std::uint64_t;

    CounterRng(std::uint64_t seed, std::uint64_t path_index, Stream stream) noexcept
        : key_(detail::mix64(detail::mix64(seed + detail::kGolden) ^
                             detail::mix64(path_index * 2 + 1) ^
                             detail::mix64(static_cast<std::uint64_t>(stream) << 32))) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        counter_ += detail::kGolden;
        return detail::mix64(key_ + counter_);
    }

    /// Uniform on the open interval (0, 1) with 53 random bits.
    double uniform() noexcept {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Exponential(rate) by inversion; rate must be positive.
    double exponential(double rate) noexcept { return -std::log(uniform()) / rate; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace jumpopt
