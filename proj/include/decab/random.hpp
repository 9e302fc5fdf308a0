#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace decab {

/// SplitMix64 finalizer, used to derive independent per-trial seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept {
    return mix_seed(base ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

// Draws are built directly from the engine's bits so that sequences are identical
// across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(mix_seed(seed)) {}

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(engine_() % span);
    }

    bool coin(double p = 0.5) { return uniform() < p; }

    Eigen::VectorXd uniform_in_box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
        Eigen::VectorXd x(lo.size());
        for (Eigen::Index k = 0; k < lo.size(); ++k) x[k] = uniform(lo[k], hi[k]);
        return x;
    }

    /// Uniform direction on the unit sphere (rejection from the cube).
    Eigen::VectorXd unit_vector(Eigen::Index n) {
        Eigen::VectorXd u(n);
        for (;;) {
            for (Eigen::Index k = 0; k < n; ++k) u[k] = uniform(-1.0, 1.0);
            const double r2 = u.squaredNorm();
            if (r2 > 1e-12 && r2 <= 1.0) return u / std::sqrt(r2);
        }
    }

    /// Uniform point in the closed ball of radius r centred at the origin.
    Eigen::VectorXd in_ball(Eigen::Index n, double r) {
        return unit_vector(n) * (r * std::pow(uniform(), 1.0 / static_cast<double>(n)));
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace decab
