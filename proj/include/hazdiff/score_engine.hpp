#pragma once

#include "hazdiff/baseline_hazard.hpp"
#include "hazdiff/common.hpp"
#include "hazdiff/error.hpp"
#include "hazdiff/report.hpp"
#include "hazdiff/survival_data.hpp"

#include <boost/math/tools/toms748_solve.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

namespace hazdiff {

/// Largest |theta| * tau for which e^{theta t} is evaluated.
inline constexpr double kMaxExponent = 700.0;

inline void check_exponent(double theta, double tau) {
    if (!(std::abs(theta) * tau <= kMaxExponent)) {
        throw Error(ErrorCode::Overflow, "|theta| * tau exceeds the exponent guard");
    }
}

/**
 * Orthogonal score
 *
 *   phi(theta) = n^-1 sum_i {D_i - e_i} int_0^tau e^{D_i theta t} dM_i(t; theta),
 *   dM_i = dN_i - Y_i {(D_i theta + beta'Z_i) dt + dLambda(t; theta)},
 *
 * for a fixed set of subjects, nuisances and an affine-in-theta baseline. Subjects are
 * followed up to min(X_i, horizon) where horizon is the baseline's last knot; all
 * time integrals are closed form.
 */
class ScoreFunction {
public:
    ScoreFunction(const SurvivalDataset& data, const Vector& beta, const Vector& propensity, BaselineEstimate baseline)
        : baseline_(std::move(baseline)), tau_(data.tau()), n_(data.n()) {
        if (beta.size() != data.p() || propensity.size() != data.n()) {
            throw Error(ErrorCode::InvalidArgument, "nuisance dimensions do not match the data");
        }
        const Vector eta = data.covariates() * beta;
        const double horizon = baseline_.horizon;
        std::vector<Index> treated;
        for (Index i = 0; i < n_; ++i) {
            const double x = std::min(data.time(i), horizon);
            const double event = data.event(i) && data.time(i) <= horizon ? 1.0 : 0.0;
            const double resid = data.treatments()(i) - propensity(i);
            if (data.treated(i)) {
                treated.push_back(i);
            } else {
                control_constant_ += resid * (event - eta(i) * x - baseline_.drift(x));
                control_slope_ += resid * baseline_.treatment(x);
            }
        }
        std::sort(treated.begin(), treated.end(),
                  [&](Index a, Index b) { return std::min(data.time(a), horizon) < std::min(data.time(b), horizon); });
        for (Index i : treated) {
            x_.push_back(std::min(data.time(i), horizon));
            event_.push_back(data.event(i) && data.time(i) <= horizon ? 1.0 : 0.0);
            resid_.push_back(data.treatments()(i) - propensity(i));
            eta_.push_back(eta(i));
        }
    }

    Index n() const noexcept { return n_; }
    double tau() const noexcept { return tau_; }
    const BaselineEstimate& baseline() const noexcept { return baseline_; }

    /// n * phi(theta).
    double sum(double theta) const {
        check_exponent(theta, tau_);
        const double eff = baseline_.effective_theta(theta);
        double total = control_constant_ + eff * control_slope_;
        if (x_.empty()) return total;
        const std::vector<double> drift = baseline_.drift.exp_integrals(theta, x_);
        const std::vector<double> treat = baseline_.treatment.exp_integrals(theta, x_);
        for (std::size_t q = 0; q < x_.size(); ++q) {
            const double x = x_[q];
            const double compensator = std::expm1(theta * x) + eta_[q] * exp_integral(theta, 0.0, x);
            const double jump = event_[q] != 0.0 ? std::exp(theta * x) : 0.0;
            total += resid_[q] * (jump - compensator - (drift[q] - eff * treat[q]));
        }
        return total;
    }

    double operator()(double theta) const { return sum(theta) / static_cast<double>(n_); }

private:
    BaselineEstimate baseline_;
    double tau_;
    Index n_;
    double control_constant_ = 0.0;
    double control_slope_ = 0.0;
    std::vector<double> x_, event_, resid_, eta_;
};

struct RootControl {
    double initial_k = 20.0;
    int expansions = 3;
    double width = 1e-12;
    std::uintmax_t max_iterations = 500;
};

/**
 * Root of a continuous score on [-K/tau, K/tau], doubling K up to `expansions` times
 * until the endpoints bracket a sign change; then TOMS 748 to the requested width.
 */
inline double solve_root(const std::function<double(double)>& score, double tau, const RootControl& control = {}) {
    double k = control.initial_k;
    for (int attempt = 0; attempt <= control.expansions; ++attempt, k *= 2.0) {
        double lo = -k / tau;
        double hi = k / tau;
        if (std::abs(lo) * tau > kMaxExponent) break;
        const double f_lo = score(lo);
        const double f_hi = score(hi);
        if (f_lo == 0.0) return lo;
        if (f_hi == 0.0) return hi;
        if ((f_lo < 0.0) == (f_hi < 0.0)) continue;
        std::uintmax_t iterations = control.max_iterations;
        const double width = control.width;
        const auto [a, b] = boost::math::tools::toms748_solve(
            score, lo, hi, f_lo, f_hi, [width](double x, double y) { return std::abs(y - x) <= width; }, iterations);
        const double fa = score(a);
        const double fb = score(b);
        return std::abs(fa) <= std::abs(fb) ? a : b;
    }
    throw Error(ErrorCode::NoRootInBracket, "score has no sign change on the search bracket");
}

/**
 * Sums behind the closed-form variance
 *
 *   sigma^2 = [n^-1 sum_i delta_i (D_i - e_i)^2 e^{2 theta D_i X_i}] / [n^-1 sum_i (1 - D_i) e_i X_i]^2.
 *
 * Kept unnormalized so cross-fitted folds can be pooled. Follow-up is cut at `horizon`.
 */
struct VarianceTerms {
    double numerator = 0.0;
    double denominator = 0.0;
    Index n = 0;

    VarianceTerms& operator+=(const VarianceTerms& o) {
        numerator += o.numerator;
        denominator += o.denominator;
        n += o.n;
        return *this;
    }

    double sigma2() const {
        const double nn = static_cast<double>(n);
        const double den = denominator / nn;
        if (!(den > 0.0)) throw Error(ErrorCode::ZeroDenominator, "no effective controls in the variance denominator");
        return (numerator / nn) / (den * den);
    }
};

inline VarianceTerms variance_terms(const SurvivalDataset& data, const Vector& propensity, double theta,
                                    double horizon = std::numeric_limits<double>::infinity()) {
    VarianceTerms v;
    v.n = data.n();
    for (Index i = 0; i < data.n(); ++i) {
        const double x = std::min(data.time(i), horizon);
        const double d = data.treatments()(i);
        const double e = propensity(i);
        if (data.event(i) && data.time(i) <= horizon) {
            v.numerator += (d - e) * (d - e) * std::exp(2.0 * theta * d * x);
        }
        v.denominator += (1.0 - d) * e * x;
    }
    return v;
}

/// Fills the propensity range of a report.
inline void attach_propensity_range(TreatmentEffectReport& r, const Vector& propensity) {
    r.ps_min = std::min(std::isnan(r.ps_min) ? 1.0 : r.ps_min, propensity.minCoeff());
    r.ps_max = std::max(std::isnan(r.ps_max) ? 0.0 : r.ps_max, propensity.maxCoeff());
}

/// Solves phi(theta) = 0 and attaches the closed-form variance.
inline TreatmentEffectReport solve_theta(const SurvivalDataset& data, const ScoreFunction& score,
                                         const Vector& propensity, const RootControl& control = {}) {
    TreatmentEffectReport r;
    r.method = Method::Score;
    r.n = data.n();
    r.p = data.p();
    r.theta = solve_root([&](double t) { return score(t); }, data.tau(), control);
    const VarianceTerms v = variance_terms(data, propensity, r.theta, score.baseline().horizon);
    attach_wald(r, v.sigma2());
    attach_propensity_range(r, propensity);
    return r;
}

}  // namespace hazdiff
