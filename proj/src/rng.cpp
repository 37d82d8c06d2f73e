#include "delaylab/rng.hpp"

#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace delaylab {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(product >> 32);
    lo = static_cast<std::uint32_t>(product);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(const std::array<std::uint32_t, 4>& counter,
                                        const std::array<std::uint32_t, 2>& key) {
    std::array<std::uint32_t, 4> ctr = counter;
    std::array<std::uint32_t, 2> k = key;
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
        mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ k[0], lo1, hi0 ^ ctr[3] ^ k[1], lo0};
        k[0] += kPhiloxW0;
        k[1] += kPhiloxW1;
    }
    return ctr;
}

double deterministic_exp(double x) {
    if (x != x) return x;
    if (x > 709.0) return HUGE_VAL;
    if (x < -745.0) return 0.0;

    const bool negate = x < 0.0;
    double a = negate ? -x : x;

    // Split a = n + f with integer n and f in [0, 1).
    const int n = static_cast<int>(a);
    const double f = a - static_cast<double>(n);

    // exp(f) by Taylor series; terms are added smallest-last for a fixed,
    // platform-independent rounding pattern.
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k <= 30; ++k) {
        term = term * f / static_cast<double>(k);
        sum += term;
        if (term < 1e-20 * sum) break;
    }

    // e itself from the same series at f = 1.
    static const double kE = [] {
        double t = 1.0, s = 1.0;
        for (int k = 1; k <= 30; ++k) {
            t = t / static_cast<double>(k);
            s += t;
        }
        return s;
    }();

    // exp(n) by square-and-multiply over the bits of n.
    double int_part = 1.0;
    double base = kE;
    int m = n;
    while (m > 0) {
        if (m & 1) int_part *= base;
        base *= base;
        m >>= 1;
    }

    const double result = int_part * sum;
    return negate ? 1.0 / result : result;
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      stream_(stream) {}

void CounterRng::refill() {
    const std::array<std::uint32_t, 4> counter = {
        static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
        static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
    buffer_ = philox4x32(counter, key_);
    ++block_;
    buffer_pos_ = 0;
}

std::uint32_t CounterRng::next_u32() {
    if (buffer_pos_ >= 4) refill();
    return buffer_[buffer_pos_++];
}

double CounterRng::next_unit() {
    const std::uint64_t hi = next_u32();
    const std::uint64_t lo = next_u32();
    const std::uint64_t bits = ((hi << 32) | lo) >> 11;  // 53 bits
    return static_cast<double>(bits) * 0x1.0p-53;
}

double CounterRng::next_unit_positive() {
    const std::uint64_t hi = next_u32();
    const std::uint64_t lo = next_u32();
    const std::uint64_t bits = ((hi << 32) | lo) >> 11;
    return static_cast<double>(bits + 1) * 0x1.0p-53;
}

double CounterRng::next_gaussian() {
    if (have_spare_gaussian_) {
        have_spare_gaussian_ = false;
        return spare_gaussian_;
    }
    const double u1 = next_unit_positive();
    const double u2 = next_unit();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.141592653589793238462643383279502884 * u2;
    spare_gaussian_ = radius * std::sin(angle);
    have_spare_gaussian_ = true;
    return radius * std::cos(angle);
}

std::int64_t CounterRng::next_poisson(double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("next_poisson: lambda must be positive");
    const double u = next_unit();
    // Smallest k with CDF(k) > u.
    double pmf = deterministic_exp(-lambda);
    double cdf = pmf;
    std::int64_t k = 0;
    constexpr std::int64_t kMaxK = 1 << 20;
    while (u >= cdf && k < kMaxK) {
        ++k;
        pmf = pmf * lambda / static_cast<double>(k);
        cdf += pmf;
    }
    return k;
}

void gaussian_noise_vector(std::uint64_t seed, std::uint64_t draw_index, double sigma,
                           std::vector<double>& out) {
    const std::size_t d = out.size();
    if (d == 0) return;
    CounterRng rng(seed, draw_index);
    const double scale = sigma / std::sqrt(static_cast<double>(d));
    for (std::size_t i = 0; i < d; ++i) {
        out[i] = scale * rng.next_gaussian();
    }
}

}  // namespace delaylab
