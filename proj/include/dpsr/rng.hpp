#pragma once

#include <cstdint>
#include <random>

namespace dpsr {

/// Seeded random stream. Built on mt19937_64 and seed_seq, both of which
/// the standard pins down exactly, with hand-rolled conversions so draws are
/// identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
        engine_.seed(seq);
    }

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t uniform_index(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = engine_();
            if (r >= threshold) {
                return r % n;
            }
        }
    }

private:
    std::mt19937_64 engine_;
};

/// Purpose-specific stream ids. Keeping each consumer on its own stream means
/// that adding draws in one place (e.g. replacement candidates) never shifts
/// the draws seen by another (e.g. exploration).
namespace streams {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kAct = 2;
inline constexpr std::uint64_t kSample = 3;
inline constexpr std::uint64_t kReplace = 4;
inline constexpr std::uint64_t kRecycle = 5;
inline constexpr std::uint64_t kEnv = 6;
inline constexpr std::uint64_t kEval = 7;
}  // namespace streams

}  // namespace dpsr
