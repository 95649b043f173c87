#pragma once

#include "hazdiff/common.hpp"
#include "hazdiff/error.hpp"
#include "hazdiff/survival_data.hpp"

#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

namespace hazdiff {

/**
 * Cumulative process with jumps at knots and a constant slope between them:
 *
 *   A(t) = sum_{knot_k <= t} jump_k + int_0^t slope(u) du,
 *
 * slope(u) = slopes[k] on (knot_{k-1}, knot_k] (knot_{-1} = 0) and 0 after the last knot.
 * Breslow-type estimators have exactly this shape: jumps from dN and drift from
 * the Y(u) beta'Z du terms.
 */
class CumulativeHazard {
public:
    CumulativeHazard() = default;

    CumulativeHazard(std::vector<double> knots, std::vector<double> jumps, std::vector<double> slopes)
        : knots_(std::move(knots)), jumps_(std::move(jumps)), slopes_(std::move(slopes)) {
        if (knots_.size() != jumps_.size() || knots_.size() != slopes_.size()) {
            throw Error(ErrorCode::InvalidArgument, "knots, jumps and slopes must have equal length");
        }
        cumulative_.resize(knots_.size());
        double acc = 0.0;
        for (std::size_t k = 0; k < knots_.size(); ++k) {
            acc += slopes_[k] * length(k) + jumps_[k];
            cumulative_[k] = acc;
        }
    }

    const std::vector<double>& knots() const noexcept { return knots_; }
    const std::vector<double>& jumps() const noexcept { return jumps_; }
    const std::vector<double>& slopes() const noexcept { return slopes_; }
    double last_knot() const noexcept { return knots_.empty() ? 0.0 : knots_.back(); }

    double operator()(double t) const {
        if (knots_.empty() || t < 0.0) return 0.0;
        const auto k = static_cast<std::size_t>(std::upper_bound(knots_.begin(), knots_.end(), t) - knots_.begin());
        // knots_[k-1] <= t < knots_[k]
        if (k == knots_.size()) return cumulative_.back();
        const double base = k == 0 ? 0.0 : cumulative_[k - 1];
        const double left = k == 0 ? 0.0 : knots_[k - 1];
        return base + slopes_[k] * (t - left);
    }

    double total_variation() const {
        double tv = 0.0;
        for (std::size_t k = 0; k < knots_.size(); ++k) tv += std::abs(jumps_[k]) + std::abs(slopes_[k]) * length(k);
        return tv;
    }

    /// int_0^x e^{rate u} dA(u) for each x in `sorted_x` (ascending), including jumps at u = x.
    std::vector<double> exp_integrals(double rate, std::span<const double> sorted_x) const {
        std::vector<double> out(sorted_x.size());
        double acc = 0.0;  // integral up to knots_[k-1]
        std::size_t k = 0;
        for (std::size_t q = 0; q < sorted_x.size(); ++q) {
            const double x = sorted_x[q];
            while (k < knots_.size() && knots_[k] <= x) {
                const double left = k == 0 ? 0.0 : knots_[k - 1];
                acc += slopes_[k] * exp_integral(rate, left, knots_[k]) + jumps_[k] * std::exp(rate * knots_[k]);
                ++k;
            }
            double partial = 0.0;
            if (k < knots_.size()) {
                const double left = k == 0 ? 0.0 : knots_[k - 1];
                if (x > left) partial = slopes_[k] * exp_integral(rate, left, x);
            }
            out[q] = acc + partial;
        }
        return out;
    }

private:
    double length(std::size_t k) const { return k == 0 ? knots_[0] : knots_[k] - knots_[k - 1]; }

    std::vector<double> knots_;
    std::vector<double> jumps_;
    std::vector<double> slopes_;
    std::vector<double> cumulative_;
};

/// Which weights enter the numerator of the arm-k weighted Breslow estimator.
enum class WeightPlacement {
    ArmWeights,        // w^k in numerator and denominator
    TreatedNumerator,  // w^1 in the numerator for both arms (diagnostic only)
};

/**
 * Baseline cumulative hazard as an affine function of theta,
 *
 *   Lambda(t; theta) = drift(t) - theta * treatment(t),
 *
 * defined on [0, horizon]; beyond the horizon no subject with positive weight is at
 * risk and the estimator does not move. With `fixed_theta` set the estimator is
 * evaluated at that theta regardless of the argument.
 */
struct BaselineEstimate {
    CumulativeHazard drift;
    CumulativeHazard treatment;
    bool weighted = false;
    int arm = -1;  // 0/1 for weighted estimators
    double horizon = 0.0;
    std::optional<double> fixed_theta;

    double effective_theta(double theta) const { return fixed_theta ? *fixed_theta : theta; }

    double operator()(double t, double theta) const {
        return drift(t) - effective_theta(theta) * treatment(t);
    }

    BaselineEstimate fixed_at(double theta) const {
        BaselineEstimate out = *this;
        out.fixed_theta = theta;
        return out;
    }
};

namespace detail {

inline BaselineEstimate breslow_from_weights(const SurvivalDataset& data, const RiskSetIndex& index,
                                             const Vector& beta, const Vector& numerator_w,
                                             const Vector& denominator_w, bool with_treatment_term) {
    if (beta.size() != data.p()) throw Error(ErrorCode::InvalidArgument, "beta has wrong dimension");
    const Vector eta = data.covariates() * beta;
    const Vector denom = index.at_risk_sum(denominator_w);
    const Vector num_eta = index.at_risk_sum(Vector(numerator_w.cwiseProduct(eta)));
    const Vector num_d = index.at_risk_sum(Vector(numerator_w.cwiseProduct(data.treatments())));
    const Vector num_events = index.event_sum(data, numerator_w);

    Index last = -1;
    for (Index k = 0; k < index.slots(); ++k) {
        if (denom(k) > 0.0) last = k;
    }
    if (last < 0) throw Error(ErrorCode::NoOverlapInArm, "no positive weighted at-risk mass");

    std::vector<double> knots, jumps, slopes_a, zeros, slopes_b;
    const auto size = static_cast<std::size_t>(last + 1);
    knots.reserve(size);
    for (Index k = 0; k <= last; ++k) {
        if (!(denom(k) > 0.0)) {
            throw Error(ErrorCode::NoOverlapInArm, "weighted at-risk sum vanishes before the arm horizon");
        }
        knots.push_back(index.time(k));
        jumps.push_back(num_events(k) / denom(k));
        slopes_a.push_back(-num_eta(k) / denom(k));
        slopes_b.push_back(with_treatment_term ? num_d(k) / denom(k) : 0.0);
        zeros.push_back(0.0);
    }
    for (Index k = last + 1; k < index.slots(); ++k) {
        if (num_events(k) != 0.0) {
            throw Error(ErrorCode::NoOverlapInArm, "event with zero weighted at-risk mass");
        }
    }

    BaselineEstimate out;
    out.horizon = index.time(last);
    out.treatment = CumulativeHazard(knots, zeros, std::move(slopes_b));
    out.drift = CumulativeHazard(std::move(knots), std::move(jumps), std::move(slopes_a));
    return out;
}

}  // namespace detail

/**
 * Breslow estimator of the baseline cumulative hazard under the additive hazards model:
 *
 *   Lambda(t; beta, theta) = int_0^t sum_i {dN_i(u) - Y_i(u)(beta'Z_i + theta D_i) du} / sum_i Y_i(u).
 */
inline BaselineEstimate breslow(const SurvivalDataset& data, const RiskSetIndex& index, const Vector& beta) {
    const Vector ones = Vector::Ones(data.n());
    return detail::breslow_from_weights(data, index, beta, ones, ones, true);
}

struct BalanceWeights {
    Vector w0;  // (1 - D_i) e_i
    Vector w1;  // D_i (1 - e_i)
};

inline BalanceWeights balance_weights(const Vector& treatments, const Vector& propensity) {
    BalanceWeights w;
    w.w0 = (1.0 - treatments.array()) * propensity.array();
    w.w1 = treatments.array() * (1.0 - propensity.array());
    return w;
}

/**
 * Arm-k weighted Breslow estimator with covariate balancing weights. With
 * `profile_theta` the treatment drift is kept (theta-profiled form); without it the
 * estimator targets Lambda_0(t) + theta t (arm 1) or Lambda_0(t) (arm 0).
 */
inline BaselineEstimate weighted_breslow(const SurvivalDataset& data, const RiskSetIndex& index, const Vector& beta,
                                         const Vector& gamma, int arm, bool profile_theta,
                                         WeightPlacement placement = WeightPlacement::ArmWeights) {
    if (arm != 0 && arm != 1) throw Error(ErrorCode::InvalidArgument, "arm must be 0 or 1");
    const BalanceWeights w = balance_weights(data.treatments(), propensities(data.covariates(), gamma));
    const Vector& denom = arm == 1 ? w.w1 : w.w0;
    const Vector& numer = placement == WeightPlacement::ArmWeights ? denom : w.w1;
    BaselineEstimate out = detail::breslow_from_weights(data, index, beta, numer, denom, profile_theta);
    out.weighted = true;
    out.arm = arm;
    return out;
}

/// Writes `time,drift,treatment,value` at every knot; value is Lambda(t; theta).
inline void write_baseline_csv(std::ostream& os, const BaselineEstimate& baseline, double theta) {
    os << "time,drift,treatment,value\n";
    char buf[128];
    for (double t : baseline.drift.knots()) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", t, baseline.drift(t), baseline.treatment(t),
                      baseline(t, theta));
        os << buf;
    }
}

}  // namespace hazdiff
