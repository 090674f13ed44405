#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace uqpe {

// Reproducibility contract: every random stream in the library is an
// mt19937_64 (its output is pinned by the C++ standard) seeded through the
// splitmix64 chain below, uniforms take the top 53 bits, and normals go
// through the AS241 inverse CDF. Identical seeds therefore give identical
// streams on every platform and toolchain.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stream identity = (master seed, purpose tag, index, subindex), mixed one
// component at a time. Used for simulation replications, bootstrap draws and
// their redraw attempts, and oracle sampling blocks.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag,
                                 std::uint64_t index = 0, std::uint64_t sub = 0) {
    std::uint64_t s = splitmix64(master ^ tag);
    s = splitmix64(s ^ index);
    s = splitmix64(s ^ sub);
    return s;
}

namespace streamtag {
inline constexpr std::uint64_t simulate = 0x53494d5f44415441ULL;
inline constexpr std::uint64_t bootstrap = 0x424f4f545f455441ULL;
inline constexpr std::uint64_t oracle = 0x4f5241434c455f58ULL;
inline constexpr std::uint64_t test = 0x544553545f544147ULL;
}  // namespace streamtag

class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}

    // Strictly inside (0,1): ((x >> 11) + 0.5) * 2^-53.
    double uniform01() {
        const std::uint64_t x = engine_();
        return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal();

    Eigen::VectorXd normals(Eigen::Index n);

    std::uint64_t raw() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

}  // namespace uqpe
