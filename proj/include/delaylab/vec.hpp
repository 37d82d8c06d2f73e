#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace delaylab {

inline double squared_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

inline double norm(std::span<const double> v) { return std::sqrt(squared_norm(v)); }

inline double distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        s += diff * diff;
    }
    return std::sqrt(s);
}

inline bool all_finite(std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

/// y = x - eta * g, written into y (aliasing with x allowed).
inline void step_towards(std::span<const double> x, double eta, std::span<const double> g,
                         std::span<double> y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] - eta * g[i];
}

}  // namespace delaylab
