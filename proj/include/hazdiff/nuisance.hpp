#pragma once

#include "hazdiff/ahaz_lasso.hpp"
#include "hazdiff/common.hpp"
#include "hazdiff/logit_lasso.hpp"
#include "hazdiff/report.hpp"
#include "hazdiff/rng.hpp"
#include "hazdiff/survival_data.hpp"

#include <cstdint>
#include <optional>

namespace hazdiff {

/// How the outcome coefficients are estimated.
enum class BetaMode {
    CoFit,          // Lasso on (D, Z), theta_l penalized and then discarded
    CovariateOnly,  // Lasso on Z alone
};

struct NuisanceConfig {
    int cv_folds = 10;
    int n_lambdas = 100;
    double lambda_min_ratio = 0.05;
    int cv_patience = 10;  // 0 evaluates the whole grid
    bool standardize = true;
    // Fixed penalties bypass cross-validation.
    std::optional<double> lambda_beta;
    std::optional<double> lambda_gamma;
};

struct NuisanceFit {
    Vector beta;
    Vector gamma;
    std::optional<double> theta_l;
    double lambda_beta = 0.0;
    double lambda_gamma = 0.0;

    Index s_hat_beta() const { return static_cast<Index>(nonzero_indices(beta).size()); }
    Index s_hat_gamma() const { return static_cast<Index>(nonzero_indices(gamma, 1).size()); }

    FoldSummary summary() const { return {lambda_beta, lambda_gamma, s_hat_beta(), s_hat_gamma()}; }
};

/// Caps the CV fold count so every fold keeps at least two subjects.
inline int feasible_cv_folds(int requested, Index n) {
    return std::max(2, std::min<int>(requested, static_cast<int>(n / 2)));
}

inline NuisanceFit fit_nuisances(const SurvivalDataset& data, BetaMode mode, const NuisanceConfig& config,
                                 std::uint64_t seed) {
    const int folds = feasible_cv_folds(config.cv_folds, data.n());
    NuisanceFit out;

    AhazCvOptions beta_options;
    beta_options.include_treatment = mode == BetaMode::CoFit;
    beta_options.penalize_treatment = true;
    beta_options.n_lambdas = config.n_lambdas;
    beta_options.lambda_min_ratio = config.lambda_min_ratio;
    beta_options.patience = config.cv_patience;
    beta_options.standardize = config.standardize;
    AhazLassoFit beta_fit;
    if (config.lambda_beta) {
        const RiskSetIndex index(data);
        beta_fit = fit_lasso(build_quadratic(data, index, beta_options.include_treatment, config.standardize),
                             *config.lambda_beta, true);
    } else {
        beta_fit = select_lambda_cv(data, folds, stream_seed(seed, 1), beta_options).fit;
    }
    out.beta = beta_fit.beta;
    out.theta_l = beta_fit.theta_l;
    out.lambda_beta = beta_fit.lambda;

    LogitCvOptions gamma_options;
    gamma_options.n_lambdas = config.n_lambdas;
    gamma_options.lambda_min_ratio = config.lambda_min_ratio;
    gamma_options.patience = config.cv_patience;
    gamma_options.standardize = config.standardize;
    LogitLassoFit gamma_fit;
    if (config.lambda_gamma) {
        gamma_fit = fit_logit_lasso(data.covariates(), data.treatments(), *config.lambda_gamma, std::nullopt, {},
                                    config.standardize);
    } else {
        gamma_fit = select_lambda_cv_logit(data.covariates(), data.treatments(), folds, stream_seed(seed, 2),
                                           gamma_options)
                        .fit;
    }
    out.gamma = gamma_fit.gamma;
    out.lambda_gamma = gamma_fit.lambda;
    return out;
}

}  // namespace hazdiff
