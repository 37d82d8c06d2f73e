#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace delaylab {

// Philox4x32-10 block cipher used as a counter-based random generator.
// Outputs depend only on (key, counter), never on call history, which is
// what makes replays order-independent and bit-reproducible.
std::array<std::uint32_t, 4> philox4x32(const std::array<std::uint32_t, 4>& counter,
                                        const std::array<std::uint32_t, 2>& key);

// Deterministic exp(x) built from IEEE add/mul/div only (argument reduction +
// Taylor series). libm's exp may round differently across platforms; schedule
// generation must not depend on that.
double deterministic_exp(double x);

/// Stateful view over the Philox stream for a fixed (seed, stream) pair.
/// Two instances with equal (seed, stream) yield bitwise-identical sequences.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream);

    std::uint32_t next_u32();
    /// Uniform double in [0, 1) with 53 random bits.
    double next_unit();
    /// Uniform double in (0, 1]; never returns zero.
    double next_unit_positive();
    /// Standard normal via Box-Muller (consumes draws in pairs internally).
    double next_gaussian();
    /// Poisson(lambda) by inverse-CDF walk over a single uniform.
    std::int64_t next_poisson(double lambda);

private:
    void refill();

    std::array<std::uint32_t, 2> key_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buffer_{};
    int buffer_pos_ = 4;  // empty
    bool have_spare_gaussian_ = false;
    double spare_gaussian_ = 0.0;
};

/// Fills out with zero-mean gaussian noise of total variance sigma^2
/// (per-coordinate variance sigma^2/d), keyed on (seed, draw_index) only.
void gaussian_noise_vector(std::uint64_t seed, std::uint64_t draw_index, double sigma,
                           std::vector<double>& out);

}  // namespace delaylab
