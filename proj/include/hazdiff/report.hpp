#pragma once

#include "hazdiff/common.hpp"
#include "hazdiff/error.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hazdiff {

enum class Method { NaiveLasso, Score, Hdi, ScoreCf, HdiCf };

inline constexpr std::string_view to_string(Method m) noexcept {
    switch (m) {
        case Method::NaiveLasso: return "naive_lasso";
        case Method::Score: return "score";
        case Method::Hdi: return "hdi";
        case Method::ScoreCf: return "score_cf";
        case Method::HdiCf: return "hdi_cf";
    }
    return "unknown";
}

inline constexpr Method kAllMethods[] = {Method::NaiveLasso, Method::Score, Method::Hdi, Method::ScoreCf,
                                         Method::HdiCf};

/// Accepts both `hdi_cf` and the CLI spelling `hdi-cf`.
inline std::optional<Method> parse_method(std::string_view s) {
    std::string norm(s);
    for (char& c : norm) {
        if (c == '-') c = '_';
    }
    for (Method m : kAllMethods) {
        if (norm == to_string(m)) return m;
    }
    return std::nullopt;
}

inline constexpr double kNormalQuantile975 = 1.959964;

struct FoldSummary {
    double lambda_beta = std::numeric_limits<double>::quiet_NaN();
    double lambda_gamma = std::numeric_limits<double>::quiet_NaN();
    Index s_hat_beta = 0;
    Index s_hat_gamma = 0;
};

/// Point estimate with Wald inference. theta is a hazard difference in 1/time units.
struct TreatmentEffectReport {
    Method method = Method::Score;
    double theta = 0.0;
    double se = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double p_value = 1.0;
    Index n = 0;
    Index p = 0;
    double lambda_beta = std::numeric_limits<double>::quiet_NaN();
    double lambda_gamma = std::numeric_limits<double>::quiet_NaN();
    Index s_hat_beta = 0;
    Index s_hat_gamma = 0;
    double ps_min = std::numeric_limits<double>::quiet_NaN();
    double ps_max = std::numeric_limits<double>::quiet_NaN();
    std::optional<int> k;
    std::vector<FoldSummary> per_fold;

    bool covers(double truth) const { return ci_low <= truth && truth <= ci_high; }
};

/// Fills se, CI and p-value from sigma^2 (the variance of sqrt(n) (theta_hat - theta)).
inline void attach_wald(TreatmentEffectReport& r, double sigma2) {
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
        throw Error(ErrorCode::ZeroDenominator, "variance estimate is not positive");
    }
    r.se = std::sqrt(sigma2 / static_cast<double>(r.n));
    r.ci_low = r.theta - kNormalQuantile975 * r.se;
    r.ci_high = r.theta + kNormalQuantile975 * r.se;
    r.p_value = std::erfc(std::abs(r.theta / r.se) / std::sqrt(2.0));
}

inline nlohmann::ordered_json to_json(const TreatmentEffectReport& r) {
    nlohmann::ordered_json j;
    j["method"] = std::string(to_string(r.method));
    j["theta"] = r.theta;
    j["se"] = r.se;
    j["ci_low"] = r.ci_low;
    j["ci_high"] = r.ci_high;
    j["p_value"] = r.p_value;
    j["n"] = r.n;
    j["p"] = r.p;
    j["lambda_beta"] = r.lambda_beta;
    j["lambda_gamma"] = r.lambda_gamma;
    j["s_hat_beta"] = r.s_hat_beta;
    j["s_hat_gamma"] = r.s_hat_gamma;
    j["ps_min"] = r.ps_min;
    j["ps_max"] = r.ps_max;
    if (r.k) {
        j["k"] = *r.k;
        auto folds = nlohmann::ordered_json::array();
        for (const auto& f : r.per_fold) {
            nlohmann::ordered_json fj;
            fj["lambda_beta"] = f.lambda_beta;
            fj["lambda_gamma"] = f.lambda_gamma;
            fj["s_hat_beta"] = f.s_hat_beta;
            fj["s_hat_gamma"] = f.s_hat_gamma;
            folds.push_back(std::move(fj));
        }
        j["per_fold"] = std::move(folds);
    }
    return j;
}

}  // namespace hazdiff
