#include "stfa/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace stfa {

double Rng::normal(double mu, double sigma) {
    if (has_spare_) {
        has_spare_ = false;
        return mu + sigma * spare_;
    }
    // Box-Muller; u1 in (0,1] so the log is finite.
    double u1 = 1.0 - uniform01();
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return mu + sigma * r * std::cos(a);
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw std::invalid_argument("uniform_int: hi < lo");
    std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1u;
    if (range == 0) return static_cast<std::int64_t>(next_u64());  // full range
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return lo + static_cast<std::int64_t>(x % range);
}

static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return splitmix64(splitmix64(base) ^ splitmix64(stream + 0x51ed2701ull));
}

std::uint64_t derive_seed(std::uint64_t base, const std::string& stream) {
    // FNV-1a over the stream name, then mixed with the base.
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : stream) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return derive_seed(base, h);
}

}  // namespace stfa
