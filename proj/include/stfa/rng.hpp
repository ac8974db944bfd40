#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace stfa {

// Deterministic random source. mt19937_64 raw output with hand-rolled
// distributions, so the same seed yields the same stream on every platform
// and standard library (std::uniform_real_distribution et al. are not
// pinned by the standard).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // [0, 1)
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller with a cached spare.
    double normal(double mu = 0.0, double sigma = 1.0);

    // Inclusive range, rejection sampled.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// splitmix64-style mix; used to derive independent per-stream seeds from one
// base seed (per clip, per epoch, ...).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);
std::uint64_t derive_seed(std::uint64_t base, const std::string& stream);

}  // namespace stfa
