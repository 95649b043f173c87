#pragma once

#include "hazdiff/ahaz_lasso.hpp"
#include "hazdiff/baseline_hazard.hpp"
#include "hazdiff/common.hpp"
#include "hazdiff/crossfit.hpp"
#include "hazdiff/error.hpp"
#include "hazdiff/survival_data.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace hazdiff {

/// Known truth, available only for simulated data.
struct NuisanceTruth {
    std::optional<Vector> beta0;
    bool exp_link = false;                // outcome contributions are exp(beta0'Z)
    std::optional<Vector> propensity;     // E(D_i | Z_i) per subject
};

struct NuisanceDiagnostics {
    std::optional<double> deviance_beta;
    std::optional<double> deviance_gamma;
    double magnitude_beta = 0.0;
    double magnitude_gamma = 0.0;
    bool magnitude_gamma_divergent = false;
};

/// M_gamma values above this are reported as divergent.
inline constexpr double kDivergentMagnitude = 100.0;

/**
 * Average testing deviances over the cross-fitting folds,
 *
 *   D_beta^2  = n^-1 sum_j sum_{i in I_j} int {(beta^(j) - beta0)'Z_i}^2 Y_i(t) dt,
 *   D_gamma^2 = n^-1 sum_j sum_{i in I_j} {expit(gamma^(j)'Z_i) - E(D_i|Z_i)}^2,
 *
 * reported as square roots. With `exp_link` the outcome term compares beta^(j)'Z_i with
 * exp(beta0'Z_i). Int Y_i(t) dt over [0, tau] is X_i.
 */
inline NuisanceDiagnostics empirical_deviances(const SurvivalDataset& data, const std::vector<FoldNuisance>& folds,
                                               const NuisanceTruth& truth) {
    if (!truth.beta0 && !truth.propensity) {
        throw Error(ErrorCode::TruthRequired, "deviances need beta0 or the true propensities");
    }
    NuisanceDiagnostics out;
    const double n = static_cast<double>(data.n());
    if (truth.beta0) {
        if (truth.beta0->size() != data.p()) throw Error(ErrorCode::InvalidArgument, "beta0 has wrong dimension");
        const Vector true_eta = data.covariates() * *truth.beta0;
        double sum = 0.0;
        for (const auto& f : folds) {
            for (Index i : f.test) {
                const double fitted = data.covariates().row(i).dot(f.fit.beta);
                const double target = truth.exp_link ? std::exp(true_eta(i)) : true_eta(i);
                sum += (fitted - target) * (fitted - target) * data.time(i);
            }
        }
        out.deviance_beta = std::sqrt(sum / n);
    }
    if (truth.propensity) {
        if (truth.propensity->size() != data.n()) {
            throw Error(ErrorCode::InvalidArgument, "true propensities have wrong length");
        }
        double sum = 0.0;
        for (const auto& f : folds) {
            const Vector& g = f.fit.gamma;
            for (Index i : f.test) {
                const double e = expit(g(0) + data.covariates().row(i).dot(g.tail(g.size() - 1)));
                sum += (e - (*truth.propensity)(i)) * (e - (*truth.propensity)(i));
            }
        }
        out.deviance_gamma = std::sqrt(sum / n);
    }
    return out;
}

/**
 * Magnitudes of the fold nuisances, maximized over folds:
 *
 *   M_beta  = max_j sqrt(int beta^(j)' [k/n sum_{i in I_j} {Z_i - Zbar^(j)(t)}^(x)2 Y_i(t)] beta^(j) dt),
 *   M_gamma = max_j {(n/k) / sum_{i in I_j} w0_i X_i + (n/k) / sum_{i in I_j} w1_i Y_i(tau)}.
 *
 * M_gamma is flagged divergent when a denominator falls below (n/k) 1e-8 or the value
 * exceeds 100; a vanishing denominator gives +inf.
 */
inline NuisanceDiagnostics empirical_magnitudes(const SurvivalDataset& data, const std::vector<FoldNuisance>& folds) {
    NuisanceDiagnostics out;
    const double n = static_cast<double>(data.n());
    const double k = static_cast<double>(folds.size());
    const double scale = n / k;
    for (const auto& f : folds) {
        const SurvivalDataset test = data.subset(f.test);
        const RiskSetIndex index(test);
        const double nj = static_cast<double>(test.n());
        const auto terms = centered_quadratic(test, index, test.covariates() * f.fit.beta);
        const double mb = std::sqrt(std::max(0.0, terms.quadratic * nj / scale));
        out.magnitude_beta = std::max(out.magnitude_beta, mb);

        const BalanceWeights w = balance_weights(test.treatments(), propensities(test.covariates(), f.fit.gamma));
        double d0 = 0.0, d1 = 0.0;
        for (Index i = 0; i < test.n(); ++i) {
            d0 += w.w0(i) * test.time(i);
            if (test.time(i) >= test.tau()) d1 += w.w1(i);
        }
        const double floor = scale * 1e-8;
        if (d0 < floor || d1 < floor) out.magnitude_gamma_divergent = true;
        const double mg = (d0 > 0.0 ? scale / d0 : INFINITY) + (d1 > 0.0 ? scale / d1 : INFINITY);
        out.magnitude_gamma = std::max(out.magnitude_gamma, mg);
    }
    if (out.magnitude_gamma > kDivergentMagnitude) out.magnitude_gamma_divergent = true;
    return out;
}

/// Linear-interpolation sample quantile of an unsorted vector.
inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct PropensitySummary {
    int arm = 0;
    Index count = 0;
    double min = 0.0, q25 = 0.0, median = 0.0, q75 = 0.0, max = 0.0;
};

inline std::vector<PropensitySummary> propensity_summary(const Vector& treatments, const Vector& propensity) {
    std::vector<PropensitySummary> out;
    for (int arm : {0, 1}) {
        std::vector<double> v;
        for (Index i = 0; i < treatments.size(); ++i) {
            if (static_cast<int>(treatments(i)) == arm) v.push_back(propensity(i));
        }
        PropensitySummary s;
        s.arm = arm;
        s.count = static_cast<Index>(v.size());
        if (!v.empty()) {
            s.min = *std::min_element(v.begin(), v.end());
            s.max = *std::max_element(v.begin(), v.end());
            s.q25 = quantile(v, 0.25);
            s.median = quantile(v, 0.5);
            s.q75 = quantile(v, 0.75);
        }
        out.push_back(s);
    }
    return out;
}

struct BalanceRow {
    std::string probe;  // "z3" for a marginal threshold, "joint" for a product threshold
    std::vector<double> thresholds;
    double f0 = 0.0;
    double f1 = 0.0;
    double gap() const { return std::abs(f1 - f0); }
};

struct BalanceTable {
    std::vector<BalanceRow> rows;
    double sup_gap = 0.0;
};

/**
 * Weighted empirical distribution functions of the covariates in each arm,
 *
 *   F_d(z) = sum_i w^d_i I(Z_i <= z) / sum_i w^d_i,
 *
 * evaluated on each covariate's deciles and, for p <= 3, on the grid of joint deciles.
 */
inline BalanceTable balance_report(const SurvivalDataset& data, const Vector& gamma) {
    const BalanceWeights w = balance_weights(data.treatments(), propensities(data.covariates(), gamma));
    const double m0 = w.w0.sum();
    const double m1 = w.w1.sum();
    if (!(m0 > 0.0) || !(m1 > 0.0)) throw Error(ErrorCode::ZeroWeightMass, "an arm has zero balancing weight");
    const Matrix& z = data.covariates();
    const Index p = data.p();

    std::vector<std::vector<double>> deciles(static_cast<std::size_t>(p));
    for (Index j = 0; j < p; ++j) {
        std::vector<double> col(z.col(j).data(), z.col(j).data() + z.rows());
        for (int d = 1; d <= 9; ++d) deciles[static_cast<std::size_t>(j)].push_back(quantile(col, d / 10.0));
    }

    BalanceTable table;
    auto add = [&](std::string probe, std::vector<double> thresholds, const std::vector<Index>& columns) {
        double f0 = 0.0, f1 = 0.0;
        for (Index i = 0; i < data.n(); ++i) {
            bool below = true;
            for (std::size_t c = 0; c < columns.size() && below; ++c) below = z(i, columns[c]) <= thresholds[c];
            if (below) {
                f0 += w.w0(i);
                f1 += w.w1(i);
            }
        }
        BalanceRow row{std::move(probe), std::move(thresholds), f0 / m0, f1 / m1};
        table.sup_gap = std::max(table.sup_gap, row.gap());
        table.rows.push_back(std::move(row));
    };

    for (Index j = 0; j < p; ++j) {
        for (double t : deciles[static_cast<std::size_t>(j)]) add("z" + std::to_string(j + 1), {t}, {j});
    }
    if (p >= 2 && p <= 3) {
        std::vector<Index> columns(static_cast<std::size_t>(p));
        for (Index j = 0; j < p; ++j) columns[static_cast<std::size_t>(j)] = j;
        std::vector<std::size_t> digit(static_cast<std::size_t>(p), 0);
        while (true) {
            std::vector<double> thresholds;
            for (Index j = 0; j < p; ++j) thresholds.push_back(deciles[static_cast<std::size_t>(j)][digit[static_cast<std::size_t>(j)]]);
            add("joint", std::move(thresholds), columns);
            std::size_t c = 0;
            while (c < digit.size() && ++digit[c] == 9) digit[c++] = 0;
            if (c == digit.size()) break;
        }
    }
    return table;
}

inline void write_balance_csv(std::ostream& os, const BalanceTable& table) {
    os << "probe,thresholds,f0,f1,gap\n";
    char buf[128];
    for (const auto& row : table.rows) {
        os << row.probe << ',';
        for (std::size_t c = 0; c < row.thresholds.size(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", row.thresholds[c]);
            os << (c ? ";" : "") << buf;
        }
        std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g\n", row.f0, row.f1, row.gap());
        os << buf;
    }
}

inline nlohmann::ordered_json to_json(const NuisanceDiagnostics& d) {
    nlohmann::ordered_json j;
    if (d.deviance_beta) j["deviance_beta"] = *d.deviance_beta;
    if (d.deviance_gamma) j["deviance_gamma"] = *d.deviance_gamma;
    j["magnitude_beta"] = d.magnitude_beta;
    j["magnitude_gamma"] = d.magnitude_gamma;
    j["magnitude_gamma_divergent"] = d.magnitude_gamma_divergent;
    return j;
}

inline nlohmann::ordered_json to_json(const std::vector<PropensitySummary>& summary) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& s : summary) {
        nlohmann::ordered_json j;
        j["arm"] = s.arm;
        j["count"] = s.count;
        j["min"] = s.min;
        j["q25"] = s.q25;
        j["median"] = s.median;
        j["q75"] = s.q75;
        j["max"] = s.max;
        arr.push_back(std::move(j));
    }
    return arr;
}

}  // namespace hazdiff
