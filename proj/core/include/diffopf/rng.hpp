#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include <Eigen/Core>

namespace diffopf {

// Counter-based generator: Philox4x32-10 (Salmon et al., "Parallel random
// numbers: as easy as 1, 2, 3"). A (seed, stream) pair selects an
// independent sequence; the counter advances within it. Draws depend only
// on (seed, stream, position), so any unit of work can be given its own
// stream and produces the same values no matter how work is scheduled.
class Philox {
public:
    Philox(std::uint64_t seed, std::uint64_t stream)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          ctr_hi_(stream) {}

    std::uint32_t next_u32();
    std::uint64_t next_u64();

    /// Uniform double in [0, 1) with 53 random mantissa bits.
    double uniform();

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller; pairs are cached, so draws come in
    /// a fixed order independent of call sites.
    double normal();

    Eigen::VectorXd normal_vector(Eigen::Index n);
    Eigen::VectorXd uniform_vector(Eigen::Index n, double lo, double hi);

    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n);

private:
    std::array<std::uint32_t, 4> block(std::uint64_t counter) const;
    void refill();

    std::array<std::uint32_t, 2> key_;
    std::uint64_t ctr_hi_ = 0;  // stream id, occupies the high counter words
    std::uint64_t ctr_lo_ = 0;  // draw position
    std::array<std::uint32_t, 4> buf_{};
    int buf_pos_ = 4;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

/// Stable 64-bit stream id for a named substream, e.g.
/// stream_id("chain", 17). Lets every record draw, sampling chain, or
/// training batch own a private sequence under one user-facing seed.
std::uint64_t stream_id(std::string_view tag, std::uint64_t index = 0);

}  // namespace diffopf
