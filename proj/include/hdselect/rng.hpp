#pragma once
#include <cstdint>
#include <vector>

namespace hdselect {

// Phi^{-1}: inverse standard normal CDF (Wichura's AS 241, double precision).
// Domain (0,1); throws std::invalid_argument outside.
double normal_quantile(double p);

// Standard normal CDF via erfc.
double normal_cdf(double x);

// Deterministic xoshiro256++ generator seeded through splitmix64. The
// stream depends only on the seed, not on the platform's distribution
// implementations, so seeded runs are byte-reproducible.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    // uniform on [0, 1)
    double uniform();
    // standard normal via inverse-CDF transform (stateless across calls)
    double normal();
    // uniform integer on [0, n), n > 0
    std::uint64_t uniform_int(std::uint64_t n);
    // Fisher-Yates; deterministic for a given seed and call sequence
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t s_[4];
};

}  // namespace hdselect
