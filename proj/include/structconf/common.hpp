#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace structconf {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// No spanning arborescence satisfies the constraints.
struct NoTreeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnsupportedMethodError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateWeightsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UndefinedMetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// splitmix64 finalizer; used to derive independent per-draw seeds.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t instance_id,
                                 std::uint64_t draw) {
    return mix64(mix64(mix64(seed) ^ instance_id) ^ draw);
}

// Counter-based stream of standard normals; platform-independent, unlike
// std::normal_distribution.
class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed) : state_(seed) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // Box-Muller on two uniforms in (0,1)
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

private:
    double uniform01() {
        const std::uint64_t bits = mix64(state_ + counter_++);
        // top 53 bits, shifted into (0,1]; never returns 0 so log is safe
        return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
    }

    std::uint64_t state_;
    std::uint64_t counter_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace structconf
