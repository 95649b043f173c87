#pragma once

#include "hazdiff/common.hpp"
#include "hazdiff/error.hpp"
#include "hazdiff/folds.hpp"
#include "hazdiff/penalty_grid.hpp"
#include "hazdiff/survival_data.hpp"

#include <cassert>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace hazdiff {

/**
 * Quadratic form of the additive hazards loss,
 *
 *   H = n^-1 sum_i int_0^tau {V_i - Vbar(t)}^{(x)2} Y_i(t) dt,
 *   h = n^-1 sum_i int_0^tau {V_i - Vbar(t)} dN_i(t),
 *
 * with V_i = (D_i, Z_i) or Z_i and Vbar(t) the at-risk mean.
 */
struct AhazQuadratic {
    Matrix H;
    Vector h;
    bool includes_treatment = false;
    Index n = 0;
    // Per-coordinate penalty multipliers; empty means 1. Setting them to the column
    // standard deviations is the same as fitting on standardized columns.
    Vector penalty_scale;

    Index dim() const { return h.size(); }
    double scale(Index j) const { return penalty_scale.size() == 0 ? 1.0 : penalty_scale(j); }
};

/// b'Hb and b'h for b with linear predictors eta_i = V_i'b, without forming H.
struct CenteredQuadraticTerms {
    double quadratic = 0.0;
    double linear = 0.0;
};

inline CenteredQuadraticTerms centered_quadratic(const SurvivalDataset& data, const RiskSetIndex& index,
                                                 const Vector& eta) {
    const Vector at_risk_eta = index.at_risk_sum(eta);
    double q = (data.times().array() * eta.array().square()).sum();
    for (Index k = 0; k < index.slots(); ++k) {
        q -= index.segment_length(k) * at_risk_eta(k) * at_risk_eta(k) / static_cast<double>(index.at_risk(k));
    }
    double l = 0.0;
    for (Index i = 0; i < data.n(); ++i) {
        if (!data.event(i)) continue;
        const Index k = index.slot_of(i);
        l += eta(i) - at_risk_eta(k) / static_cast<double>(index.at_risk(k));
    }
    const double n = static_cast<double>(data.n());
    return {q / n, l / n};
}

inline AhazQuadratic build_quadratic(const SurvivalDataset& data, const RiskSetIndex& index, bool include_treatment,
                                     bool standardize = true) {
    if (index.slots() == 1 && index.event_count(0) == 0) {
        throw Error(ErrorCode::DegenerateDesign, "all subjects share one time and no events occurred");
    }
    const Matrix v = include_treatment ? data.design_with_treatment() : data.covariates();
    const Index q = v.cols();
    const double n = static_cast<double>(data.n());

    // sum_i X_i V_i V_i' - sum_k len_k S_k S_k' / R_k, S_k the at-risk column sums.
    const Matrix s = index.at_risk_sum(v);
    Vector seg_weight(index.slots());
    for (Index k = 0; k < index.slots(); ++k) {
        seg_weight(k) = std::sqrt(index.segment_length(k) / static_cast<double>(index.at_risk(k)));
    }
    const Matrix vx = v.array().colwise() * data.times().array().sqrt();
    const Matrix sx = s.array().colwise() * seg_weight.array();

    Matrix lower = Matrix::Zero(q, q);
    lower.selfadjointView<Eigen::Lower>().rankUpdate(vx.transpose(), 1.0 / n);
    lower.selfadjointView<Eigen::Lower>().rankUpdate(sx.transpose(), -1.0 / n);

    AhazQuadratic out;
    out.H = lower.selfadjointView<Eigen::Lower>();
    out.h = Vector::Zero(q);
    for (Index i = 0; i < data.n(); ++i) {
        if (!data.event(i)) continue;
        const Index k = index.slot_of(i);
        out.h += (v.row(i) - s.row(k) / static_cast<double>(index.at_risk(k))).transpose();
    }
    out.h /= n;
    out.includes_treatment = include_treatment;
    out.n = data.n();
    if (standardize) out.penalty_scale = column_scales(v);
    return out;
}

/**
 * Penalized fit of the additive hazards quadratic loss,
 *
 *   minimize  1/2 b'Hb - b'h + lambda * sum_{j penalized} s_j |b_j|,
 *
 * s_j the quadratic's penalty scales.
 *
 * When the design includes the treatment column, coef(0) is theta_l and beta the rest.
 */
struct AhazLassoFit {
    std::optional<double> theta_l;
    Vector beta;
    Vector coef;
    double lambda = 0.0;
    IndexList active_set;  // indices into beta
    double objective = 0.0;
    int sweeps = 0;
    double kkt_residual = 0.0;
    IndexList pinned;  // coordinates with H_jj = 0, held at zero
};

struct LassoControl {
    double tolerance = 1e-9;
    int max_sweeps = 10000;
};

namespace detail {

inline std::vector<char> penalty_mask(const AhazQuadratic& q, bool penalize_treatment) {
    std::vector<char> pen(static_cast<std::size_t>(q.dim()), 1);
    if (q.includes_treatment && !penalize_treatment) pen[0] = 0;
    return pen;
}

inline double ahaz_objective(const AhazQuadratic& q, const Vector& b, const Vector& grad, double lambda,
                             const std::vector<char>& pen) {
    // grad = h - Hb, so 1/2 b'Hb - b'h = -1/2 b'(h + grad).
    double obj = -0.5 * b.dot(q.h + grad);
    if (lambda > 0.0 && std::isfinite(lambda)) {
        for (Index j = 0; j < b.size(); ++j) {
            if (pen[static_cast<std::size_t>(j)]) obj += lambda * q.scale(j) * std::abs(b(j));
        }
    }
    return obj;
}

inline double ahaz_kkt(const AhazQuadratic& q, const Vector& b, const Vector& grad, double lambda_in,
                       const std::vector<char>& pen, const std::vector<char>& pinned) {
    double worst = 0.0;
    for (Index j = 0; j < b.size(); ++j) {
        if (pinned[static_cast<std::size_t>(j)]) continue;
        const double g = grad(j);
        const double lambda = lambda_in * q.scale(j);
        double v = 0.0;
        if (!pen[static_cast<std::size_t>(j)]) {
            v = std::abs(g);
        } else if (b(j) == 0.0) {
            v = std::max(0.0, std::abs(g) - lambda);
        } else {
            v = std::abs(g - lambda * (b(j) > 0.0 ? 1.0 : -1.0));
        }
        worst = std::max(worst, v);
    }
    return worst;
}

}  // namespace detail

/// Cyclic coordinate descent with soft-thresholding, cycling over the active set
/// between full sweeps.
inline AhazLassoFit fit_lasso(const AhazQuadratic& q, double lambda, bool penalize_treatment = true,
                              const std::optional<Vector>& init = std::nullopt, const LassoControl& control = {}) {
    if (!(lambda >= 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be nonnegative");
    const Index dim = q.dim();
    const auto pen = detail::penalty_mask(q, penalize_treatment);
    const double diag_floor = 1e-12 * std::max(1.0, q.H.diagonal().cwiseAbs().maxCoeff());
    std::vector<char> pinned(static_cast<std::size_t>(dim), 0);
    for (Index j = 0; j < dim; ++j) pinned[static_cast<std::size_t>(j)] = q.H(j, j) <= diag_floor;

    Vector b = init ? *init : Vector::Zero(dim);
    if (b.size() != dim) throw Error(ErrorCode::InvalidArgument, "init has wrong dimension");
    for (Index j = 0; j < dim; ++j) {
        if (pinned[static_cast<std::size_t>(j)]) b(j) = 0.0;
    }
    Vector grad = q.h - q.H * b;

    auto update = [&](Index j) -> double {
        const auto ju = static_cast<std::size_t>(j);
        if (pinned[ju]) return 0.0;
        const double d = q.H(j, j);
        const double z = grad(j) + d * b(j);
        const double nb = pen[ju] ? soft_threshold(z, lambda * q.scale(j)) / d : z / d;
        const double delta = nb - b(j);
        if (delta != 0.0) {
            grad.noalias() -= q.H.col(j) * delta;
            b(j) = nb;
        }
        return std::abs(delta);
    };

    auto try_face_solve = [&] {
        IndexList support;
        for (Index j = 0; j < dim; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            if (!pinned[ju] && (b(j) != 0.0 || !pen[ju])) support.push_back(j);
        }
        if (support.empty()) return;
        const auto m = static_cast<Index>(support.size());
        Matrix qa(m, m);
        Vector ca(m), sa(m);
        for (Index a = 0; a < m; ++a) {
            const Index ja = support[static_cast<std::size_t>(a)];
            for (Index c = 0; c < m; ++c) qa(a, c) = q.H(ja, support[static_cast<std::size_t>(c)]);
            ca(a) = q.h(ja);
            sa(a) = pen[static_cast<std::size_t>(ja)] ? (b(ja) > 0.0 ? 1.0 : -1.0) * q.scale(ja) : 0.0;
        }
        const auto x = signed_face_solve(qa, ca, sa, lambda);
        if (!x) return;
        Vector nb = Vector::Zero(dim);
        for (Index a = 0; a < m; ++a) nb(support[static_cast<std::size_t>(a)]) = (*x)(a);
        const Vector ngrad = q.h - q.H * nb;
        if (detail::ahaz_objective(q, nb, ngrad, lambda, pen) > detail::ahaz_objective(q, b, grad, lambda, pen)) return;
        b = nb;
        grad = ngrad;
    };

#ifndef NDEBUG
    double last_obj = detail::ahaz_objective(q, b, grad, lambda, pen);
    auto check_descent = [&] {
        const double obj = detail::ahaz_objective(q, b, grad, lambda, pen);
        assert(obj <= last_obj + 1e-10 * (1.0 + std::abs(last_obj)));
        last_obj = obj;
    };
#else
    auto check_descent = [] {};
#endif

    int sweeps = 0;
    double change = std::numeric_limits<double>::infinity();
    while (true) {
        change = 0.0;
        for (Index j = 0; j < dim; ++j) change = std::max(change, update(j));
        ++sweeps;
        check_descent();
        if (change < control.tolerance) break;
        if (sweeps >= control.max_sweeps) break;
        // Iterate on the current support until it settles, then re-check everything.
        // Every few sweeps try the exact minimizer on the current orthant face.
        int inner = 0;
        while (sweeps < control.max_sweeps) {
            change = 0.0;
            for (Index j = 0; j < dim; ++j) {
                if (b(j) != 0.0 || !pen[static_cast<std::size_t>(j)]) change = std::max(change, update(j));
            }
            ++sweeps;
            check_descent();
            if (change < control.tolerance) break;
            if (++inner % 5 == 0) try_face_solve();
        }
        if (sweeps >= control.max_sweeps) break;
    }
    if (change >= control.tolerance) {
        throw Error(ErrorCode::NoConvergence, "coordinate descent stopped after " + std::to_string(sweeps) +
                                                  " sweeps, max coefficient change " + std::to_string(change));
    }

    AhazLassoFit fit;
    fit.lambda = lambda;
    fit.coef = b;
    fit.sweeps = sweeps;
    fit.objective = detail::ahaz_objective(q, b, grad, lambda, pen);
    fit.kkt_residual = detail::ahaz_kkt(q, b, grad, lambda, pen, pinned);
    for (Index j = 0; j < dim; ++j) {
        if (pinned[static_cast<std::size_t>(j)]) fit.pinned.push_back(j);
    }
    if (q.includes_treatment) {
        fit.theta_l = b(0);
        fit.beta = b.tail(dim - 1);
    } else {
        fit.beta = b;
    }
    fit.active_set = nonzero_indices(fit.beta);
    return fit;
}

/// Smallest lambda at which every penalized coefficient is zero.
inline double lambda_max(const AhazQuadratic& q, bool penalize_treatment = true) {
    const auto fit0 = fit_lasso(q, std::numeric_limits<double>::infinity(), penalize_treatment);
    const Vector grad = q.h - q.H * fit0.coef;
    const auto pen = detail::penalty_mask(q, penalize_treatment);
    double m = 0.0;
    for (Index j = 0; j < q.dim(); ++j) {
        if (pen[static_cast<std::size_t>(j)]) m = std::max(m, std::abs(grad(j)) / q.scale(j));
    }
    return m;
}

/// Warm-started fits along a decreasing grid.
inline std::vector<AhazLassoFit> lasso_path(const AhazQuadratic& q, const std::vector<double>& grid,
                                            bool penalize_treatment = true, const LassoControl& control = {}) {
    std::vector<AhazLassoFit> path;
    path.reserve(grid.size());
    std::optional<Vector> warm;
    for (double lambda : grid) {
        path.push_back(fit_lasso(q, lambda, penalize_treatment, warm, control));
        warm = path.back().coef;
    }
    return path;
}

inline std::vector<AhazLassoFit> lasso_path(const AhazQuadratic& q, int n_lambdas, double lambda_min_ratio,
                                            bool penalize_treatment = true) {
    return lasso_path(q, lambda_grid(lambda_max(q, penalize_treatment), n_lambdas, lambda_min_ratio),
                      penalize_treatment);
}

struct AhazCvOptions {
    bool include_treatment = false;
    bool penalize_treatment = true;
    int n_lambdas = 100;
    double lambda_min_ratio = 0.05;
    bool standardize = true;
    // Stop the grid once the CV loss has not improved for this many points; 0 runs it all.
    int patience = 10;
};

struct AhazCvResult {
    double lambda_star = 0.0;
    AhazLassoFit fit;
    std::vector<double> lambdas;  // the grid points actually evaluated
    std::vector<double> cv_loss;
};

/**
 * K-fold cross-validated penalty. Each held-out fold is scored by its own
 * empirical loss b'H_test b - 2 b'h_test (centred on the test fold's risk sets);
 * losses are summed over folds and the first minimizer on the grid wins.
 * Folds advance along the grid together so the path can stop early.
 */
inline AhazCvResult select_lambda_cv(const SurvivalDataset& data, int folds, std::uint64_t seed,
                                     const AhazCvOptions& options = {}) {
    if (folds < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 folds");
    const auto assignment = stratified_fold_assignment(data.treatments(), folds, seed);
    const auto members = fold_members(assignment);
    for (const auto& m : members) {
        if (data.n() - static_cast<Index>(m.size()) < 2) {
            throw Error(ErrorCode::FoldTooSmall, "a training split has fewer than 2 subjects");
        }
    }
    if (static_cast<int>(members.size()) != folds) throw Error(ErrorCode::FoldTooSmall, "empty fold");

    const RiskSetIndex index(data);
    const AhazQuadratic full = build_quadratic(data, index, options.include_treatment, options.standardize);
    const auto grid = lambda_grid(lambda_max(full, options.penalize_treatment), options.n_lambdas,
                                  options.lambda_min_ratio);

    struct Held {
        SurvivalDataset data;
        RiskSetIndex index;
        Matrix design;
    };
    struct Fold {
        AhazQuadratic q;
        std::optional<Held> test;  // empty for a single subject, whose centred loss is 0
        std::optional<Vector> warm;
    };
    std::vector<Fold> cv;
    cv.reserve(members.size());
    for (const auto& test_rows : members) {
        const SurvivalDataset train = data.subset(complement(test_rows, data.n()));
        const RiskSetIndex train_index(train);
        std::optional<Held> held;
        if (test_rows.size() >= 2) {
            SurvivalDataset test = data.subset(test_rows);
            RiskSetIndex test_index(test);
            Matrix design = options.include_treatment ? test.design_with_treatment() : test.covariates();
            held.emplace(Held{std::move(test), std::move(test_index), std::move(design)});
        }
        cv.push_back({build_quadratic(train, train_index, options.include_treatment, options.standardize),
                      std::move(held), std::nullopt});
    }

    AhazCvResult out;
    std::size_t best = 0;
    for (std::size_t m = 0; m < grid.size(); ++m) {
        double loss = 0.0;
        for (auto& f : cv) {
            const AhazLassoFit fit = fit_lasso(f.q, grid[m], options.penalize_treatment, f.warm);
            f.warm = fit.coef;
            if (!f.test) continue;
            const auto terms = centered_quadratic(f.test->data, f.test->index, f.test->design * fit.coef);
            loss += terms.quadratic - 2.0 * terms.linear;
        }
        out.lambdas.push_back(grid[m]);
        out.cv_loss.push_back(loss);
        if (loss < out.cv_loss[best]) best = m;
        if (options.patience > 0 && m - best >= static_cast<std::size_t>(options.patience)) break;
    }
    out.lambda_star = out.lambdas[best];
    std::optional<Vector> warm;
    for (std::size_t m = 0; m <= best; ++m) {
        out.fit = fit_lasso(full, out.lambdas[m], options.penalize_treatment, warm);
        warm = out.fit.coef;
    }
    return out;
}

}  // namespace hazdiff
