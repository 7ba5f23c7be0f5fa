#include "bbmld/rng.hpp"

#include <bit>
#include <cmath>

#include "bbmld/special.hpp"

namespace bbmld {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53U;
constexpr std::uint32_t kMul1 = 0xCD9E8D57U;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9U;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85U;

inline Philox4x32::Counter philox_round(const Philox4x32::Counter& c,
                                        const Philox4x32::Key& k) noexcept {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    return {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0],
            static_cast<std::uint32_t>(p1),
            static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1],
            static_cast<std::uint32_t>(p0)};
}

}  // namespace

Philox4x32::Counter Philox4x32::encrypt(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        ctr = philox_round(ctr, key);
    }
    return ctr;
}

std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) noexcept {
    return mix64(mix64(a) ^ (b * 0xC2B2AE3D27D4EB4FULL + 0x165667B19E3779F9ULL));
}

std::uint64_t hash_double(double v) noexcept { return mix64(std::bit_cast<std::uint64_t>(v)); }

std::uint64_t replica_id(std::uint64_t domain, std::uint64_t group, std::uint64_t index) noexcept {
    return hash_combine(hash_combine(domain, group), index);
}

StreamFactory::StreamFactory(std::uint64_t seed, std::uint64_t replica) noexcept
    : seed_(seed), replica_(replica) {
    const std::uint64_t k = hash_combine(seed, replica);
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
}

Stream::Stream(const StreamFactory& factory, std::uint64_t subject, Purpose purpose) noexcept
    : key_(factory.key()), subject_(subject), purpose_(static_cast<std::uint16_t>(purpose)) {}

Stream::result_type Stream::operator()() noexcept {
    if (available_ == 0) {
        // Counter layout: subject (64 bits) | block low 32 | purpose 16 + block high 16.
        const Philox4x32::Counter ctr{
            static_cast<std::uint32_t>(subject_), static_cast<std::uint32_t>(subject_ >> 32),
            static_cast<std::uint32_t>(block_),
            (static_cast<std::uint32_t>(purpose_) << 16) |
                static_cast<std::uint32_t>((block_ >> 32) & 0xFFFFU)};
        const auto out = Philox4x32::encrypt(ctr, key_);
        buffer_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
        buffer_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
        ++block_;
        available_ = 2;
    }
    return buffer_[2 - available_--];
}

double Stream::uniform() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double Stream::normal() noexcept { return normal_quantile(uniform()); }

double Stream::exponential(double rate) noexcept { return -std::log(uniform()) / rate; }

}  // namespace bbmld
