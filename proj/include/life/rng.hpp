#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace life {

// Derives an independent seed for a named sub-stream so that adding draws to
// one component never perturbs another.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream);

// Thin wrapper over mt19937_64. Conversions to real numbers are done by hand
// because std::uniform_real_distribution is not bit-stable across standard
// library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
    std::size_t below(std::size_t n) { return n == 0 ? 0 : static_cast<std::size_t>(engine_() % n); }
    bool chance(double p) { return uniform01() < p; }

    bool operator==(const Rng&) const = default;

private:
    std::mt19937_64 engine_;
};

} // namespace life
