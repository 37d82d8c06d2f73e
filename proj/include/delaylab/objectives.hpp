#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace delaylab {

/// A smooth scalar field with an exact gradient. `beta()` is a certified
/// upper bound on the gradient's Lipschitz constant and `lower_bound()` a
/// certified global lower bound on f; both are exact properties of the
/// instance, not estimates. Instances are immutable after construction and
/// safe for concurrent read-only use.
class Objective {
public:
    virtual ~Objective() = default;

    virtual std::size_t dimension() const = 0;
    virtual double beta() const = 0;
    virtual double lower_bound() const = 0;
    /// Known minimum value of f, when the instance has one in closed form.
    virtual std::optional<double> min_value() const = 0;

    virtual double eval(std::span<const double> x) const = 0;
    virtual void gradient(std::span<const double> x, std::span<double> out) const = 0;

    std::vector<double> gradient(std::span<const double> x) const {
        std::vector<double> g(dimension());
        gradient(x, g);
        return g;
    }

    virtual nlohmann::json descriptor() const = 0;

protected:
    void check_dimension(std::span<const double> x) const;
};

/// f(x) = 1/2 (x-b)' A (x-b) + c with A symmetric PSD; minimum value is c,
/// attained at x = b. beta equals the largest eigenvalue of A, exact for the
/// diagonal constructor and computed by Jacobi iteration for dense A.
class QuadraticObjective final : public Objective {
public:
    /// Diagonal A = diag(spectrum). All spectrum entries must be >= 0.
    QuadraticObjective(std::vector<double> spectrum, std::vector<double> offset,
                       double constant = 0.0);
    /// Dense symmetric PSD A, row-major d*d.
    static QuadraticObjective from_dense(std::vector<double> matrix, std::vector<double> offset,
                                         double constant = 0.0);

    std::size_t dimension() const override { return dim_; }
    double beta() const override { return beta_; }
    double lower_bound() const override { return constant_; }
    std::optional<double> min_value() const override { return constant_; }

    using Objective::gradient;
    double eval(std::span<const double> x) const override;
    void gradient(std::span<const double> x, std::span<double> out) const override;

    nlohmann::json descriptor() const override;

    const std::vector<double>& spectrum() const { return spectrum_; }

private:
    QuadraticObjective() = default;

    std::size_t dim_ = 0;
    bool diagonal_ = true;
    std::vector<double> spectrum_;  // diagonal case
    std::vector<double> matrix_;    // dense case, row-major
    std::vector<double> offset_;
    double constant_ = 0.0;
    double beta_ = 0.0;
};

/// f(x) = sum_i log(1 + x_i^2): nonconvex, nonnegative, 2-smooth, minimum 0
/// at the origin. The gradient vanishes in the far tails as well, so the
/// bowl around the origin is the only region with large gradients.
class LogSquareObjective final : public Objective {
public:
    explicit LogSquareObjective(std::size_t dim);

    std::size_t dimension() const override { return dim_; }
    double beta() const override { return 2.0; }
    double lower_bound() const override { return 0.0; }
    std::optional<double> min_value() const override { return 0.0; }

    using Objective::gradient;
    double eval(std::span<const double> x) const override;
    void gradient(std::span<const double> x, std::span<double> out) const override;

    nlohmann::json descriptor() const override;

private:
    std::size_t dim_;
};

/// Unbiased stochastic gradient oracle: g(x) = grad f(x) + xi with
/// E xi = 0 and E ||xi||^2 = sigma^2 exactly (spherical gaussian with
/// per-coordinate variance sigma^2/d). The noise is a pure function of
/// (seed, draw_index), so replays are order-independent.
class NoisyGradientOracle {
public:
    NoisyGradientOracle(std::shared_ptr<const Objective> objective, double sigma,
                        std::uint64_t seed);

    const Objective& objective() const { return *objective_; }
    double sigma() const { return sigma_; }
    std::uint64_t seed() const { return seed_; }

    void sample(std::span<const double> x, std::uint64_t draw_index, std::span<double> out) const;
    std::vector<double> sample(std::span<const double> x, std::uint64_t draw_index) const;

private:
    std::shared_ptr<const Objective> objective_;
    double sigma_;
    std::uint64_t seed_;
};

/// Builds an objective from its JSON descriptor:
///   {"kind": "quadratic"|"logsquare", "dim": d, "spectrum": [...]}
/// (sigma/seed in the same JSON object belong to the oracle and are ignored
/// here; see oracle_from_descriptor).
std::shared_ptr<const Objective> objective_from_descriptor(const nlohmann::json& j);

/// Builds the oracle described by the same JSON object (reads sigma, seed).
NoisyGradientOracle oracle_from_descriptor(const nlohmann::json& j);

}  // namespace delaylab
