#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace hazdiff {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IndexList = std::vector<Index>;

/// Linear predictors are clamped to this magnitude before the logistic link.
inline constexpr double kLinkClamp = 30.0;

inline double clamp_link(double eta) noexcept {
    return std::clamp(eta, -kLinkClamp, kLinkClamp);
}

inline double expit(double eta) noexcept {
    const double x = clamp_link(eta);
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline double logit(double p) noexcept { return std::log(p / (1.0 - p)); }

/// log(1 + e^x) without overflow.
inline double softplus(double x) noexcept {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double soft_threshold(double z, double lambda) noexcept {
    if (z > lambda) return z - lambda;
    if (z < -lambda) return z + lambda;
    return 0.0;
}

/// \int_a^b e^{rate t} dt, stable as rate -> 0.
inline double exp_integral(double rate, double a, double b) noexcept {
    if (rate == 0.0) return b - a;
    return std::exp(rate * a) * std::expm1(rate * (b - a)) / rate;
}

/// Linear predictor gamma_0 + Z gamma_{1..p}.
inline Vector linear_predictor_with_intercept(const Matrix& Z, const Vector& gamma) {
    return (Z * gamma.tail(gamma.size() - 1)).array() + gamma(0);
}

inline Vector propensities(const Matrix& Z, const Vector& gamma) {
    Vector eta = linear_predictor_with_intercept(Z, gamma);
    return eta.unaryExpr([](double v) { return expit(v); });
}

/**
 * Minimizer of 1/2 x'Qx - x'c + lambda sum_j |x_j| on the face where x has the signs
 * `signs` (0 marks an unpenalized coordinate): Q x = c - lambda * signs. Returns nothing
 * if Q is numerically singular or a coordinate leaves its orthant.
 */
inline std::optional<Vector> signed_face_solve(const Matrix& q, const Vector& c, const Vector& signs, double lambda) {
    const Vector rhs = c - lambda * signs;
    const Eigen::LDLT<Matrix> ldlt(q);
    if (ldlt.info() != Eigen::Success) return std::nullopt;
    Vector x = ldlt.solve(rhs);
    if (!x.allFinite()) return std::nullopt;
    if ((q * x - rhs).norm() > 1e-9 * (1.0 + rhs.norm())) return std::nullopt;
    for (Index j = 0; j < x.size(); ++j) {
        if (signs(j) != 0.0 && !(x(j) * signs(j) > 0.0)) return std::nullopt;
    }
    return x;
}

/// Population standard deviation of each column, with 1 for constant columns.
inline Vector column_scales(const Matrix& v) {
    Vector s(v.cols());
    const double n = static_cast<double>(v.rows());
    for (Index j = 0; j < v.cols(); ++j) {
        const double mean = v.col(j).mean();
        const double sd = std::sqrt((v.col(j).array() - mean).square().sum() / n);
        s(j) = sd > 0.0 ? sd : 1.0;
    }
    return s;
}

inline IndexList nonzero_indices(const Vector& v, Index offset = 0) {
    IndexList out;
    for (Index j = offset; j < v.size(); ++j) {
        if (v(j) != 0.0) out.push_back(j - offset);
    }
    return out;
}

}  // namespace hazdiff
