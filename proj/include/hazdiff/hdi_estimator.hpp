#pragma once

#include "hazdiff/baseline_hazard.hpp"
#include "hazdiff/common.hpp"
#include "hazdiff/error.hpp"
#include "hazdiff/report.hpp"
#include "hazdiff/score_engine.hpp"
#include "hazdiff/survival_data.hpp"

namespace hazdiff {

/**
 * Numerator and denominator of the closed-form HDi estimator,
 *
 *   theta = sum_i w0_i int (Y_i {beta'(Z_i - Ztil(u)) du + dNtil(u)} - dN_i) / sum_i w0_i X_i,
 *
 * where Ztil and Ntil are the w1-weighted covariate mean and event processes.
 * Follow-up is cut at the last time the treated arm has positive weight at risk.
 */
struct HdiTerms {
    double numerator = 0.0;
    double denominator = 0.0;
    double horizon = 0.0;

    double theta() const {
        if (!(denominator > 0.0)) throw Error(ErrorCode::ZeroDenominator, "sum of w0_i X_i is zero");
        return numerator / denominator;
    }
};

inline HdiTerms hdi_terms(const SurvivalDataset& data, const RiskSetIndex& index, const Vector& beta,
                          const Vector& propensity) {
    if (beta.size() != data.p() || propensity.size() != data.n()) {
        throw Error(ErrorCode::InvalidArgument, "nuisance dimensions do not match the data");
    }
    const BalanceWeights w = balance_weights(data.treatments(), propensity);
    // Ntil(t) - int_0^t beta'Ztil(u) du
    const BaselineEstimate treated_arm = detail::breslow_from_weights(data, index, beta, w.w1, w.w1, false);
    const Vector eta = data.covariates() * beta;
    HdiTerms out;
    out.horizon = treated_arm.horizon;
    for (Index i = 0; i < data.n(); ++i) {
        if (data.treated(i)) continue;
        const double x = std::min(data.time(i), out.horizon);
        const double event = data.event(i) && data.time(i) <= out.horizon ? 1.0 : 0.0;
        out.numerator += w.w0(i) * (treated_arm.drift(x) + eta(i) * x - event);
        out.denominator += w.w0(i) * x;
    }
    return out;
}

/// Closed-form HDi estimate with the closed-form variance.
inline TreatmentEffectReport hdi(const SurvivalDataset& data, const RiskSetIndex& index, const Vector& beta,
                                 const Vector& gamma) {
    const Vector ps = propensities(data.covariates(), gamma);
    const HdiTerms terms = hdi_terms(data, index, beta, ps);
    TreatmentEffectReport r;
    r.method = Method::Hdi;
    r.n = data.n();
    r.p = data.p();
    r.theta = terms.theta();
    attach_wald(r, variance_terms(data, ps, r.theta, terms.horizon).sigma2());
    attach_propensity_range(r, ps);
    return r;
}

/// Score with the theta-profiled treated-arm weighted Breslow plugged in; affine in theta.
inline ScoreFunction hdi_score(const SurvivalDataset& data, const RiskSetIndex& index, const Vector& beta,
                               const Vector& gamma) {
    BaselineEstimate arm1 = weighted_breslow(data, index, beta, gamma, 1, true);
    return ScoreFunction(data, beta, propensities(data.covariates(), gamma), std::move(arm1));
}

struct LinearScore {
    double intercept = 0.0;
    double slope = 0.0;

    double root() const {
        if (slope == 0.0) throw Error(ErrorCode::ZeroSlope, "linear score has zero slope");
        return -intercept / slope;
    }
};

/// Reads intercept and slope off the (exactly linear) HDi score.
inline LinearScore linear_score(const ScoreFunction& score) {
    LinearScore ls;
    ls.intercept = score(0.0);
    ls.slope = score(1.0 / score.tau()) * score.tau() - ls.intercept * score.tau();
    return ls;
}

inline double hdi_from_score(const ScoreFunction& score) { return linear_score(score).root(); }

}  // namespace hazdiff
