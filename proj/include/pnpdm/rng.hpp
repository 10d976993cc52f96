#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace pnpdm {

/// Caller-owned generator. One per chain; never shared across threads.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_(engine_); }
    std::uint64_t next_u64() { return engine_(); }

    void fill_normal(std::span<double> out) {
        for (double& v : out)
            v = normal_(engine_);
    }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// SplitMix64 finalizer; used to derive independent stream seeds from a master seed.
constexpr std::uint64_t mix_seed(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return mix_seed(mix_seed(master) ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

template <typename... Rest>
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, Rest... rest) {
    return derive_seed(derive_seed(master, stream), static_cast<std::uint64_t>(rest)...);
}

} // namespace pnpdm
