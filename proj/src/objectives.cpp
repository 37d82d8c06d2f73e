#include "delaylab/objectives.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "delaylab/rng.hpp"
#include "delaylab/vec.hpp"

namespace delaylab {

namespace {

// Largest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.
// Convergence to machine precision is fast for the small d used here.
double jacobi_max_eigenvalue(std::vector<double> a, std::size_t d) {
    auto at = [&](std::size_t r, std::size_t c) -> double& { return a[r * d + c]; };
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t r = 0; r < d; ++r)
            for (std::size_t c = r + 1; c < d; ++c) off += at(r, c) * at(r, c);
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                const double apq = at(p, q);
                if (apq == 0.0) continue;
                const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < d; ++k) {
                    const double akp = at(k, p);
                    const double akq = at(k, q);
                    at(k, p) = c * akp - s * akq;
                    at(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < d; ++k) {
                    const double apk = at(p, k);
                    const double aqk = at(q, k);
                    at(p, k) = c * apk - s * aqk;
                    at(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    double max_ev = at(0, 0);
    for (std::size_t i = 1; i < d; ++i) max_ev = std::max(max_ev, at(i, i));
    return max_ev;
}

}  // namespace

void Objective::check_dimension(std::span<const double> x) const {
    if (x.size() != dimension()) {
        throw std::invalid_argument("objective: input has dimension " + std::to_string(x.size()) +
                                    ", expected " + std::to_string(dimension()));
    }
    if (!all_finite(x)) throw std::invalid_argument("objective: input is not finite");
}

QuadraticObjective::QuadraticObjective(std::vector<double> spectrum, std::vector<double> offset,
                                       double constant) {
    if (spectrum.empty()) throw std::invalid_argument("quadratic: empty spectrum");
    if (offset.empty()) offset.assign(spectrum.size(), 0.0);
    if (offset.size() != spectrum.size()) {
        throw std::invalid_argument("quadratic: offset/spectrum dimension mismatch");
    }
    for (double ev : spectrum) {
        if (!(ev >= 0.0)) throw std::invalid_argument("quadratic: spectrum must be nonnegative");
    }
    dim_ = spectrum.size();
    diagonal_ = true;
    beta_ = 0.0;
    for (double ev : spectrum) beta_ = std::max(beta_, ev);
    spectrum_ = std::move(spectrum);
    offset_ = std::move(offset);
    constant_ = constant;
}

QuadraticObjective QuadraticObjective::from_dense(std::vector<double> matrix,
                                                  std::vector<double> offset, double constant) {
    QuadraticObjective q;
    const std::size_t d = offset.size();
    if (d == 0 || matrix.size() != d * d) {
        throw std::invalid_argument("quadratic: dense matrix must be d*d with d = offset size");
    }
    for (std::size_t r = 0; r < d; ++r) {
        for (std::size_t c = r + 1; c < d; ++c) {
            if (matrix[r * d + c] != matrix[c * d + r]) {
                throw std::invalid_argument("quadratic: matrix is not symmetric");
            }
        }
    }
    q.dim_ = d;
    q.diagonal_ = false;
    q.beta_ = jacobi_max_eigenvalue(matrix, d);
    q.matrix_ = std::move(matrix);
    q.offset_ = std::move(offset);
    q.constant_ = constant;
    return q;
}

double QuadraticObjective::eval(std::span<const double> x) const {
    check_dimension(x);
    double value = 0.0;
    if (diagonal_) {
        for (std::size_t i = 0; i < dim_; ++i) {
            const double z = x[i] - offset_[i];
            value += spectrum_[i] * z * z;
        }
    } else {
        for (std::size_t r = 0; r < dim_; ++r) {
            double row = 0.0;
            for (std::size_t c = 0; c < dim_; ++c) row += matrix_[r * dim_ + c] * (x[c] - offset_[c]);
            value += (x[r] - offset_[r]) * row;
        }
    }
    return 0.5 * value + constant_;
}

void QuadraticObjective::gradient(std::span<const double> x, std::span<double> out) const {
    check_dimension(x);
    if (diagonal_) {
        for (std::size_t i = 0; i < dim_; ++i) out[i] = spectrum_[i] * (x[i] - offset_[i]);
    } else {
        for (std::size_t r = 0; r < dim_; ++r) {
            double row = 0.0;
            for (std::size_t c = 0; c < dim_; ++c) row += matrix_[r * dim_ + c] * (x[c] - offset_[c]);
            out[r] = row;
        }
    }
}

nlohmann::json QuadraticObjective::descriptor() const {
    nlohmann::json j;
    j["kind"] = "quadratic";
    j["dim"] = dim_;
    if (diagonal_) {
        j["spectrum"] = spectrum_;
    } else {
        j["matrix"] = matrix_;
    }
    bool zero_offset = true;
    for (double b : offset_) zero_offset = zero_offset && b == 0.0;
    if (!zero_offset) j["offset"] = offset_;
    if (constant_ != 0.0) j["constant"] = constant_;
    return j;
}

LogSquareObjective::LogSquareObjective(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw std::invalid_argument("logsquare: dimension must be positive");
}

double LogSquareObjective::eval(std::span<const double> x) const {
    check_dimension(x);
    double value = 0.0;
    for (double u : x) value += std::log1p(u * u);
    return value;
}

void LogSquareObjective::gradient(std::span<const double> x, std::span<double> out) const {
    check_dimension(x);
    for (std::size_t i = 0; i < dim_; ++i) {
        const double u = x[i];
        out[i] = 2.0 * u / (1.0 + u * u);
    }
}

nlohmann::json LogSquareObjective::descriptor() const {
    return nlohmann::json{{"kind", "logsquare"}, {"dim", dim_}};
}

NoisyGradientOracle::NoisyGradientOracle(std::shared_ptr<const Objective> objective, double sigma,
                                         std::uint64_t seed)
    : objective_(std::move(objective)), sigma_(sigma), seed_(seed) {
    if (!objective_) throw std::invalid_argument("oracle: null objective");
    if (!(sigma_ >= 0.0)) throw std::invalid_argument("oracle: sigma must be nonnegative");
}

void NoisyGradientOracle::sample(std::span<const double> x, std::uint64_t draw_index,
                                 std::span<double> out) const {
    objective_->gradient(x, out);
    if (sigma_ == 0.0) return;
    const std::size_t d = out.size();
    CounterRng rng(seed_, draw_index);
    const double scale = sigma_ / std::sqrt(static_cast<double>(d));
    for (std::size_t i = 0; i < d; ++i) out[i] += scale * rng.next_gaussian();
}

std::vector<double> NoisyGradientOracle::sample(std::span<const double> x,
                                                std::uint64_t draw_index) const {
    std::vector<double> g(objective_->dimension());
    sample(x, draw_index, g);
    return g;
}

std::shared_ptr<const Objective> objective_from_descriptor(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    const auto dim = j.at("dim").get<std::size_t>();
    if (kind == "logsquare") {
        return std::make_shared<LogSquareObjective>(dim);
    }
    if (kind == "quadratic") {
        std::vector<double> offset;
        if (j.contains("offset")) offset = j.at("offset").get<std::vector<double>>();
        const double constant = j.value("constant", 0.0);
        if (j.contains("matrix")) {
            if (offset.empty()) offset.assign(dim, 0.0);
            return std::make_shared<QuadraticObjective>(QuadraticObjective::from_dense(
                j.at("matrix").get<std::vector<double>>(), std::move(offset), constant));
        }
        std::vector<double> spectrum;
        if (j.contains("spectrum")) {
            spectrum = j.at("spectrum").get<std::vector<double>>();
        } else {
            spectrum.assign(dim, 1.0);
        }
        if (spectrum.size() != dim) {
            throw std::invalid_argument("objective descriptor: spectrum size != dim");
        }
        return std::make_shared<QuadraticObjective>(std::move(spectrum), std::move(offset),
                                                    constant);
    }
    throw std::invalid_argument("objective descriptor: unknown kind '" + kind + "'");
}

NoisyGradientOracle oracle_from_descriptor(const nlohmann::json& j) {
    auto objective = objective_from_descriptor(j);
    const double sigma = j.value("sigma", 0.0);
    const std::uint64_t seed = j.value("seed", std::uint64_t{0});
    return NoisyGradientOracle(std::move(objective), sigma, seed);
}

}  // namespace delaylab
