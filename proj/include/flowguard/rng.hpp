#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace flowguard {

// Seed value plus the algorithm tag. Identical seed gives an identical
// stream; worker substreams are derived from the seed alone, so chunked
// Monte Carlo results do not depend on the thread count.
struct RngState {
    std::uint64_t seed = 0;

    static constexpr std::string_view algorithm = "xoshiro256++/splitmix64";

    // Child stream k. Mixing is a splitmix64 finalizer over (seed, k),
    // so substream(a) != substream(b) streams decorrelate for a != b.
    [[nodiscard]] RngState substream(std::uint64_t k) const;
};

// Instantiated generator. xoshiro256++ (Blackman & Vigna constants),
// state expanded from the 64-bit seed with splitmix64. Normal deviates
// use the Marsaglia polar method (sqrt/log only).
class Rng {
  public:
    explicit Rng(RngState state);

    std::uint64_t next_u64();

    // Uniform in [0, 1), 53-bit resolution.
    double next_unit();

    // Uniform in [lo, hi).
    double next_uniform(double lo, double hi);

    // Standard normal.
    double next_normal();

    // Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n);

  private:
    std::array<std::uint64_t, 4> s_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

namespace detail {
std::uint64_t splitmix64(std::uint64_t& x);
}

} // namespace flowguard
