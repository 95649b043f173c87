#pragma once

#include "hazdiff/ahaz_lasso.hpp"
#include "hazdiff/baseline_hazard.hpp"
#include "hazdiff/crossfit.hpp"
#include "hazdiff/error.hpp"
#include "hazdiff/hdi_estimator.hpp"
#include "hazdiff/nuisance.hpp"
#include "hazdiff/report.hpp"
#include "hazdiff/rng.hpp"
#include "hazdiff/score_engine.hpp"
#include "hazdiff/survival_data.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hazdiff {

struct EstimatorConfig {
    NuisanceConfig nuisance;  // one-shot fits use nuisance.cv_folds
    int k = 10;
    BetaMode score_beta = BetaMode::CoFit;
    BetaMode hdi_beta = BetaMode::CoFit;
    BetaMode score_cf_beta = BetaMode::CoFit;
    BetaMode hdi_cf_beta = BetaMode::CovariateOnly;
    // Plug Lambda(.; beta, theta_l) into the one-shot score instead of the profiled form.
    bool fixed_baseline = false;
    int workers = 1;
};

/**
 * Lasso on (D, Z) with theta left unpenalized; the treatment coefficient is the naive
 * estimate. Its standard error treats the fit as a one-covariate additive hazards model:
 * se^2 = n^-1 sum_i int (D_i - Dbar(t))^2 dN_i(t) / (n H_DD^2).
 */
inline TreatmentEffectReport naive_lasso(const SurvivalDataset& data, const NuisanceConfig& config,
                                         std::uint64_t seed) {
    const RiskSetIndex index(data);
    AhazLassoFit fit;
    if (config.lambda_beta) {
        fit = fit_lasso(build_quadratic(data, index, true, config.standardize), *config.lambda_beta, false);
    } else {
        AhazCvOptions options;
        options.include_treatment = true;
        options.penalize_treatment = false;
        options.n_lambdas = config.n_lambdas;
        options.lambda_min_ratio = config.lambda_min_ratio;
        options.patience = config.cv_patience;
        options.standardize = config.standardize;
        fit = select_lambda_cv(data, feasible_cv_folds(config.cv_folds, data.n()), stream_seed(seed, 1), options).fit;
    }
    const AhazQuadratic q = build_quadratic(data, index, true);
    const Vector treated_at_risk = index.at_risk_sum(data.treatments());
    double meat = 0.0;
    for (Index pos = 0; pos < data.n(); ++pos) {
        const Index i = index.order()[static_cast<std::size_t>(pos)];
        if (!data.event(i)) continue;
        const Index k = index.slot_of(i);
        const double dbar = treated_at_risk(k) / static_cast<double>(index.at_risk(k));
        meat += (data.treatments()(i) - dbar) * (data.treatments()(i) - dbar);
    }
    const double n = static_cast<double>(data.n());
    const double hdd = q.H(0, 0);
    if (!(hdd > 0.0)) throw Error(ErrorCode::ZeroDenominator, "treatment has no variation within risk sets");

    TreatmentEffectReport r;
    r.method = Method::NaiveLasso;
    r.n = data.n();
    r.p = data.p();
    r.theta = *fit.theta_l;
    attach_wald(r, (meat / n) / (hdd * hdd));
    r.lambda_beta = fit.lambda;
    r.s_hat_beta = static_cast<Index>(fit.active_set.size());
    return r;
}

inline TreatmentEffectReport score_estimate(const SurvivalDataset& data, const NuisanceFit& nuisance,
                                            bool fixed_baseline = false) {
    const RiskSetIndex index(data);
    BaselineEstimate baseline = breslow(data, index, nuisance.beta);
    if (fixed_baseline && nuisance.theta_l) baseline = baseline.fixed_at(*nuisance.theta_l);
    const Vector ps = propensities(data.covariates(), nuisance.gamma);
    const ScoreFunction score(data, nuisance.beta, ps, std::move(baseline));
    TreatmentEffectReport r = solve_theta(data, score, ps);
    r.lambda_beta = nuisance.lambda_beta;
    r.lambda_gamma = nuisance.lambda_gamma;
    r.s_hat_beta = nuisance.s_hat_beta();
    r.s_hat_gamma = nuisance.s_hat_gamma();
    return r;
}

inline TreatmentEffectReport hdi_estimate(const SurvivalDataset& data, const NuisanceFit& nuisance) {
    const RiskSetIndex index(data);
    TreatmentEffectReport r = hdi(data, index, nuisance.beta, nuisance.gamma);
    r.lambda_beta = nuisance.lambda_beta;
    r.lambda_gamma = nuisance.lambda_gamma;
    r.s_hat_beta = nuisance.s_hat_beta();
    r.s_hat_gamma = nuisance.s_hat_gamma();
    return r;
}

/// Outcome of one method: a report, or the error that stopped it.
struct MethodOutcome {
    Method method;
    std::optional<TreatmentEffectReport> report;
    std::optional<ErrorCode> error;
    std::string message;

    bool ok() const { return report.has_value(); }
};

/**
 * Runs the requested methods on one dataset. Nuisance fits are shared between
 * methods that use the same beta mode; cross-fitted methods share one fold plan.
 * Estimator errors are captured per method.
 */
class EstimationSession {
public:
    EstimationSession(const SurvivalDataset& data, EstimatorConfig config, std::uint64_t seed)
        : data_(data), config_(std::move(config)), seed_(seed) {}

    const NuisanceFit& nuisances(BetaMode mode) {
        auto it = one_shot_.find(mode);
        if (it == one_shot_.end()) {
            it = one_shot_.emplace(mode, fit_nuisances(data_, mode, config_.nuisance, stream_seed(seed_, 10))).first;
        }
        return it->second;
    }

    const FoldPlan& plan() {
        if (!plan_) plan_ = make_fold_plan(data_, config_.k, stream_seed(seed_, 20));
        return *plan_;
    }

    const std::vector<FoldNuisance>& fold_nuisances(BetaMode mode) {
        auto it = folds_.find(mode);
        if (it == folds_.end()) {
            CrossfitConfig cf;
            cf.nuisance = config_.nuisance;
            cf.workers = config_.workers;
            it = folds_.emplace(mode, fit_fold_nuisances(data_, plan(), mode, cf)).first;
        }
        return it->second;
    }

    TreatmentEffectReport run(Method method) {
        switch (method) {
            case Method::NaiveLasso: return naive_lasso(data_, config_.nuisance, stream_seed(seed_, 30));
            case Method::Score: return score_estimate(data_, nuisances(config_.score_beta), config_.fixed_baseline);
            case Method::Hdi: return hdi_estimate(data_, nuisances(config_.hdi_beta));
            case Method::ScoreCf: return crossfit_score(data_, fold_nuisances(config_.score_cf_beta));
            case Method::HdiCf: return crossfit_hdi(data_, fold_nuisances(config_.hdi_cf_beta));
        }
        throw Error(ErrorCode::InvalidArgument, "unknown method");
    }

    MethodOutcome try_run(Method method) {
        MethodOutcome out{method, std::nullopt, std::nullopt, {}};
        try {
            out.report = run(method);
        } catch (const Error& e) {
            out.error = e.code();
            out.message = e.what();
        }
        return out;
    }

private:
    const SurvivalDataset& data_;
    EstimatorConfig config_;
    std::uint64_t seed_;
    std::map<BetaMode, NuisanceFit> one_shot_;
    std::optional<FoldPlan> plan_;
    std::map<BetaMode, std::vector<FoldNuisance>> folds_;
};

}  // namespace hazdiff
