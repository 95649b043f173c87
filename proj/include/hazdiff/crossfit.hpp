#pragma once

#include "hazdiff/baseline_hazard.hpp"
#include "hazdiff/common.hpp"
#include "hazdiff/error.hpp"
#include "hazdiff/folds.hpp"
#include "hazdiff/hdi_estimator.hpp"
#include "hazdiff/nuisance.hpp"
#include "hazdiff/parallel.hpp"
#include "hazdiff/report.hpp"
#include "hazdiff/score_engine.hpp"
#include "hazdiff/survival_data.hpp"

#include <cstdint>
#include <vector>

namespace hazdiff {

struct FoldPlan {
    int k = 0;
    std::uint64_t seed = 0;
    std::vector<int> assignment;
    std::vector<IndexList> folds;  // ordered by smallest member

    Index n() const { return static_cast<Index>(assignment.size()); }
    IndexList training(std::size_t j) const { return complement(folds[j], n()); }
};

/// Plan from an explicit assignment; both arms must appear in every training split.
inline FoldPlan make_fold_plan(const Vector& treatments, std::vector<int> assignment, std::uint64_t seed = 0) {
    if (static_cast<Index>(assignment.size()) != treatments.size()) {
        throw Error(ErrorCode::InvalidArgument, "assignment length does not match n");
    }
    FoldPlan plan;
    plan.seed = seed;
    plan.assignment = std::move(assignment);
    plan.folds = fold_members(plan.assignment);
    plan.k = static_cast<int>(plan.folds.size());
    if (plan.k < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 nonempty folds");
    const double total = treatments.sum();
    for (const auto& fold : plan.folds) {
        double in_fold = 0.0;
        for (Index i : fold) in_fold += treatments(i);
        const double train_treated = total - in_fold;
        const double train_size = static_cast<double>(plan.n()) - static_cast<double>(fold.size());
        if (train_treated == 0.0 || train_treated == train_size) {
            throw Error(ErrorCode::SingleClassFold, "a training split contains a single treatment class");
        }
    }
    return plan;
}

inline FoldPlan make_fold_plan(const SurvivalDataset& data, int k, std::uint64_t seed) {
    return make_fold_plan(data.treatments(), stratified_fold_assignment(data.treatments(), k, seed), seed);
}

struct CrossfitConfig {
    NuisanceConfig nuisance;  // cv_folds here is ignored; inner CV uses k - 1
    BetaMode score_beta = BetaMode::CoFit;
    BetaMode hdi_beta = BetaMode::CovariateOnly;
    int workers = 1;
};

/// Nuisances for fold j, trained on the out-of-fold subjects only.
struct FoldNuisance {
    NuisanceFit fit;
    IndexList train;
    IndexList test;
};

inline std::vector<FoldNuisance> fit_fold_nuisances(const SurvivalDataset& data, const FoldPlan& plan,
                                                    BetaMode mode, const CrossfitConfig& config) {
    std::vector<FoldNuisance> out(plan.folds.size());
    NuisanceConfig inner = config.nuisance;
    inner.cv_folds = plan.k - 1;
    parallel_for(plan.folds.size(), config.workers, [&](std::size_t j) {
        out[j].test = plan.folds[j];
        out[j].train = plan.training(j);
        const SurvivalDataset train = data.subset(out[j].train);
        out[j].fit = fit_nuisances(train, mode, inner, stream_seed(plan.seed, 100, j));
    });
    return out;
}

inline void attach_fold_summaries(TreatmentEffectReport& r, const std::vector<FoldNuisance>& folds) {
    r.k = static_cast<int>(folds.size());
    double lb = 0.0, lg = 0.0;
    for (const auto& f : folds) {
        r.per_fold.push_back(f.fit.summary());
        lb += f.fit.lambda_beta;
        lg += f.fit.lambda_gamma;
        r.s_hat_beta = std::max(r.s_hat_beta, f.fit.s_hat_beta());
        r.s_hat_gamma = std::max(r.s_hat_gamma, f.fit.s_hat_gamma());
    }
    r.lambda_beta = lb / static_cast<double>(folds.size());
    r.lambda_gamma = lg / static_cast<double>(folds.size());
}

/**
 * Cross-fitted score estimate from given fold nuisances: the Breslow estimator of
 * fold j is built on its training subjects, the score is averaged within each fold and
 * the fold scores are averaged with equal weight 1/k.
 */
inline TreatmentEffectReport crossfit_score(const SurvivalDataset& data, const std::vector<FoldNuisance>& folds,
                                            const RootControl& control = {}) {
    std::vector<ScoreFunction> scores;
    std::vector<SurvivalDataset> tests;
    std::vector<Vector> ps;
    scores.reserve(folds.size());
    for (const auto& f : folds) {
        const SurvivalDataset train = data.subset(f.train);
        const RiskSetIndex train_index(train);
        tests.push_back(data.subset(f.test));
        ps.push_back(propensities(tests.back().covariates(), f.fit.gamma));
        scores.emplace_back(tests.back(), f.fit.beta, ps.back(), breslow(train, train_index, f.fit.beta));
    }
    const double k = static_cast<double>(folds.size());
    auto phi = [&](double theta) {
        double total = 0.0;
        for (const auto& s : scores) total += s(theta);
        return total / k;
    };
    TreatmentEffectReport r;
    r.method = Method::ScoreCf;
    r.n = data.n();
    r.p = data.p();
    r.theta = solve_root(phi, data.tau(), control);
    VarianceTerms v;
    for (std::size_t j = 0; j < folds.size(); ++j) {
        v += variance_terms(tests[j], ps[j], r.theta, scores[j].baseline().horizon);
        attach_propensity_range(r, ps[j]);
    }
    attach_wald(r, v.sigma2());
    attach_fold_summaries(r, folds);
    return r;
}

/// Cross-fitted HDi: numerators and denominators pooled over folds, each fold using
/// its own in-fold weighted processes with out-of-fold nuisances.
inline TreatmentEffectReport crossfit_hdi(const SurvivalDataset& data, const std::vector<FoldNuisance>& folds) {
    TreatmentEffectReport r;
    r.method = Method::HdiCf;
    r.n = data.n();
    r.p = data.p();
    double num = 0.0, den = 0.0;
    std::vector<SurvivalDataset> tests;
    std::vector<Vector> ps;
    std::vector<double> horizons;
    for (const auto& f : folds) {
        tests.push_back(data.subset(f.test));
        const RiskSetIndex index(tests.back());
        ps.push_back(propensities(tests.back().covariates(), f.fit.gamma));
        const HdiTerms t = hdi_terms(tests.back(), index, f.fit.beta, ps.back());
        num += t.numerator;
        den += t.denominator;
        horizons.push_back(t.horizon);
    }
    if (!(den > 0.0)) throw Error(ErrorCode::ZeroDenominator, "sum of w0_i X_i is zero");
    r.theta = num / den;
    VarianceTerms v;
    for (std::size_t j = 0; j < folds.size(); ++j) {
        v += variance_terms(tests[j], ps[j], r.theta, horizons[j]);
        attach_propensity_range(r, ps[j]);
    }
    attach_wald(r, v.sigma2());
    attach_fold_summaries(r, folds);
    return r;
}

inline TreatmentEffectReport crossfit_score(const SurvivalDataset& data, const FoldPlan& plan,
                                            const CrossfitConfig& config = {}) {
    return crossfit_score(data, fit_fold_nuisances(data, plan, config.score_beta, config));
}

inline TreatmentEffectReport crossfit_hdi(const SurvivalDataset& data, const FoldPlan& plan,
                                          const CrossfitConfig& config = {}) {
    return crossfit_hdi(data, fit_fold_nuisances(data, plan, config.hdi_beta, config));
}

}  // namespace hazdiff
