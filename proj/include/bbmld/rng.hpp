#pragma once

// Counter-based random streams.
//
// Every random draw in the toolkit is a pure function of
// (seed, replica, subject, purpose, block index). A "subject" is usually the
// lineage key of a particle, so trees can be grown, pruned or re-queried in any
// order and still produce identical values.

#include <array>
#include <cstdint>
#include <limits>

namespace bbmld {

/// Philox4x32-10 block cipher (Salmon et al., SC'11).
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter encrypt(Counter ctr, Key key) noexcept;
};

/// SplitMix64 finalizer. Bijective on 64-bit words.
std::uint64_t mix64(std::uint64_t z) noexcept;

/// Order-sensitive hash of two words; used to derive child lineage keys.
std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) noexcept;

/// Bit pattern of a double, folded into a hash. Distinguishes -0.0 from 0.0.
std::uint64_t hash_double(double v) noexcept;

/// Replica index for the i-th replica of a (domain, group) pair, so that different
/// estimators and windows never share streams under one user seed.
std::uint64_t replica_id(std::uint64_t domain, std::uint64_t group, std::uint64_t index) noexcept;

/// Tags that separate independent uses of the same subject.
enum class Purpose : std::uint16_t {
    particle = 1,      // lifetime + displacement of an ordinary particle
    bridge = 2,        // interior bridge points
    extremum = 3,      // uniform behind a span's minimum / crossing decision
    argmin = 4,        // location of a span's minimum
    refine = 5,        // sub-resolution crossing decisions
    spine_clock = 6,   // spine lifetimes
    spine_choice = 7,  // which child continues the spine
    spine_path = 8,    // spine displacements / bessel knots
    stop_time = 9,     // inverse-Gaussian passage time of the spine
    pair = 10,         // level-set pair selection
    generic = 11,
};

/// Root of all streams for one replica.
class StreamFactory {
public:
    constexpr StreamFactory() noexcept = default;
    StreamFactory(std::uint64_t seed, std::uint64_t replica) noexcept;

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] std::uint64_t replica() const noexcept { return replica_; }
    [[nodiscard]] Philox4x32::Key key() const noexcept { return key_; }

private:
    std::uint64_t seed_ = 0;
    std::uint64_t replica_ = 0;
    Philox4x32::Key key_{0, 0};
};

/// A sequential view of one (subject, purpose) stream. Satisfies
/// UniformRandomBitGenerator, so it also works with <random> distributions.
class Stream {
public:
    using result_type = std::uint64_t;

    Stream(const StreamFactory& factory, std::uint64_t subject, Purpose purpose) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept {
        return std::numeric_limits<result_type>::max();
    }

    result_type operator()() noexcept;

    /// Uniform on the open interval (0, 1) with 53-bit resolution.
    double uniform() noexcept;
    double normal() noexcept;
    double exponential(double rate = 1.0) noexcept;

private:
    Philox4x32::Key key_;
    std::uint64_t subject_;
    std::uint16_t purpose_;
    std::uint64_t block_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    int available_ = 0;
};

}  // namespace bbmld
