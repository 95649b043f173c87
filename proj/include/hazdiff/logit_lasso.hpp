#pragma once

#include "hazdiff/common.hpp"
#include "hazdiff/error.hpp"
#include "hazdiff/folds.hpp"
#include "hazdiff/penalty_grid.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace hazdiff {

/// L1-penalized logistic fit; gamma(0) is the unpenalized intercept.
struct LogitLassoFit {
    Vector gamma;
    double lambda = 0.0;
    IndexList active_set;  // slope indices (0-based over Z's columns)
    double deviance = 0.0;  // mean negative log-likelihood
    bool separation = false;
    int iterations = 0;
    double kkt_residual = 0.0;

    Vector propensities(const Matrix& Z) const { return hazdiff::propensities(Z, gamma); }
};

struct LogitControl {
    double tolerance = 1e-8;
    int max_outer = 200;
    double inner_tolerance = 1e-10;
    int max_inner_sweeps = 10000;
};

/**
 * Proximal Newton solver for
 *
 *   min_gamma  n^-1 sum_i {log(1 + e^{eta_i}) - D_i eta_i} + lambda sum_j s_j |gamma_j|,
 *
 * s_j the column standard deviations when standardizing and 1 otherwise.
 * eta_i = gamma_0 + Z_i'gamma_{1..p} clamped to [-30, 30]. Each outer step solves the
 * weighted least-squares approximation by coordinate descent on a growing active
 * set, then backtracks until the penalized objective decreases.
 */
class LogitLassoProblem {
public:
    LogitLassoProblem(const Matrix& Z, const Vector& D, bool standardize = true)
        : z_(Z), d_(D), zsq_(Z.array().square()),
          scale_(standardize ? column_scales(Z) : Vector::Ones(Z.cols())) {
        if (Z.rows() != D.size()) throw Error(ErrorCode::InvalidArgument, "Z and D lengths differ");
        for (Index i = 0; i < D.size(); ++i) {
            if (D(i) != 0.0 && D(i) != 1.0) throw Error(ErrorCode::NonBinaryColumn, "treatment must be 0 or 1");
        }
    }

    Index n() const { return z_.rows(); }
    Index p() const { return z_.cols(); }

    double lambda_max() const {
        const double dbar = d_.mean();
        const Vector g = z_.transpose() * (d_.array() - dbar).matrix();
        return g.cwiseAbs().cwiseQuotient(scale_).maxCoeff() / static_cast<double>(n());
    }

    double mean_nll(const Vector& gamma) const {
        const Vector eta = linear_predictor_with_intercept(z_, gamma);
        double s = 0.0;
        for (Index i = 0; i < n(); ++i) {
            const double e = clamp_link(eta(i));
            s += softplus(e) - d_(i) * e;
        }
        return s / static_cast<double>(n());
    }

    double objective(const Vector& gamma, double lambda) const {
        return mean_nll(gamma) + lambda * gamma.tail(p()).cwiseAbs().dot(scale_);
    }

    /// Gradient of the mean negative log-likelihood.
    Vector gradient(const Vector& gamma) const {
        const Vector eta = linear_predictor_with_intercept(z_, gamma);
        Vector resid(n());
        for (Index i = 0; i < n(); ++i) resid(i) = d_(i) - expit(eta(i));
        Vector g(p() + 1);
        g(0) = -resid.mean();
        g.tail(p()) = -(z_.transpose() * resid) / static_cast<double>(n());
        return g;
    }

    double kkt_residual(const Vector& gamma, double lambda) const {
        const Vector g = gradient(gamma);
        double worst = std::abs(g(0));
        for (Index j = 1; j <= p(); ++j) {
            const double l = lambda * scale_(j - 1);
            const double v = gamma(j) == 0.0 ? std::max(0.0, std::abs(g(j)) - l)
                                             : std::abs(g(j) + l * (gamma(j) > 0.0 ? 1.0 : -1.0));
            worst = std::max(worst, v);
        }
        return worst;
    }

    LogitLassoFit fit(double lambda, const std::optional<Vector>& init = std::nullopt,
                      const LogitControl& control = {}) const {
        if (!(lambda >= 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be nonnegative");
        const double nd = static_cast<double>(n());
        LogitLassoFit out;
        out.lambda = lambda;

        const double dbar = d_.mean();
        if (dbar == 0.0 || dbar == 1.0) {
            out.gamma = Vector::Zero(p() + 1);
            out.gamma(0) = dbar == 1.0 ? kLinkClamp : -kLinkClamp;
            out.separation = true;
            out.deviance = mean_nll(out.gamma);
            out.kkt_residual = kkt_residual(out.gamma, lambda);
            return out;
        }

        Vector gamma = init ? *init : Vector::Zero(p() + 1);
        if (gamma.size() != p() + 1) throw Error(ErrorCode::InvalidArgument, "init has wrong dimension");
        if (!init) gamma(0) = logit(dbar);
        double f_old = objective(gamma, lambda);

        Vector eta(n()), w(n()), r(n()), xwx(p());
        int outer = 0;
        bool converged = false;
        while (outer < control.max_outer) {
            ++outer;
            eta = linear_predictor_with_intercept(z_, gamma);
            bool all_saturated = true;
            for (Index i = 0; i < n(); ++i) {
                if (std::abs(eta(i)) < kLinkClamp) all_saturated = false;
                const double pi = expit(eta(i));
                w(i) = std::max(pi * (1.0 - pi), 1e-5);
                r(i) = (d_(i) - pi) / w(i);
            }
            if (all_saturated) out.separation = true;
            xwx = zsq_.transpose() * w / nd;
            const double wsum = w.sum();

            Vector proposal = gamma;
            // Weighted lasso on the working response; r holds z - eta for `proposal`.
            auto update_intercept = [&]() {
                const double delta = w.dot(r) / wsum;
                if (delta != 0.0) {
                    proposal(0) += delta;
                    r.array() -= delta;
                }
                return std::abs(delta);
            };
            auto update = [&](Index j) {
                if (xwx(j) <= 0.0) return 0.0;
                const double c = z_.col(j).dot(w.cwiseProduct(r)) / nd + xwx(j) * proposal(j + 1);
                const double nb = soft_threshold(c, lambda * scale_(j)) / xwx(j);
                const double delta = nb - proposal(j + 1);
                if (delta != 0.0) {
                    proposal(j + 1) = nb;
                    r.noalias() -= delta * z_.col(j);
                }
                return std::abs(delta);
            };

            std::vector<char> active(static_cast<std::size_t>(p()), 0);
            IndexList active_list;
            for (Index j = 0; j < p(); ++j) {
                if (proposal(j + 1) != 0.0) {
                    active[static_cast<std::size_t>(j)] = 1;
                    active_list.push_back(j);
                }
            }
            auto wls_objective = [&](const Vector& x, const Vector& resid) {
                double pen = 0.0;
                for (Index j = 1; j < x.size(); ++j) pen += scale_(j - 1) * std::abs(x(j));
                return 0.5 * w.dot(resid.cwiseProduct(resid)) / nd + lambda * pen;
            };
            // Exact weighted least-squares minimizer on the current orthant face.
            auto try_face_solve = [&] {
                IndexList support;
                for (Index j : active_list) {
                    if (proposal(j + 1) != 0.0) support.push_back(j);
                }
                const auto m = static_cast<Index>(support.size()) + 1;
                Matrix za(n(), m);
                za.col(0).setOnes();
                Vector sa = Vector::Zero(m);
                for (Index a = 1; a < m; ++a) {
                    const Index j = support[static_cast<std::size_t>(a - 1)];
                    za.col(a) = z_.col(j);
                    sa(a) = (proposal(j + 1) > 0.0 ? 1.0 : -1.0) * scale_(j);
                }
                const Vector y = r + linear_predictor_with_intercept(z_, proposal);
                const Matrix zw = za.transpose() * w.asDiagonal();
                const auto x = signed_face_solve(zw * za / nd, zw * y / nd, sa, lambda);
                if (!x) return;
                Vector next = Vector::Zero(p() + 1);
                next(0) = (*x)(0);
                for (Index a = 1; a < m; ++a) next(support[static_cast<std::size_t>(a - 1)] + 1) = (*x)(a);
                const Vector next_r = y - linear_predictor_with_intercept(z_, next);
                if (wls_objective(next, next_r) > wls_objective(proposal, r)) return;
                proposal = next;
                r = next_r;
            };

            int sweeps = 0;
            while (true) {
                int inner = 0;
                while (sweeps < control.max_inner_sweeps) {
                    double change = update_intercept();
                    for (Index j : active_list) change = std::max(change, update(j));
                    ++sweeps;
                    if (change < control.inner_tolerance) break;
                    if (++inner % 5 == 0) try_face_solve();
                }
                const Vector c = z_.transpose() * w.cwiseProduct(r) / nd;
                bool added = false;
                for (Index j = 0; j < p(); ++j) {
                    if (!active[static_cast<std::size_t>(j)] && std::abs(c(j)) > lambda * scale_(j)) {
                        active[static_cast<std::size_t>(j)] = 1;
                        active_list.push_back(j);
                        added = true;
                    }
                }
                if (!added || sweeps >= control.max_inner_sweeps) break;
            }

            // Backtracking along the proximal Newton direction.
            const Vector direction = proposal - gamma;
            double step = 1.0;
            Vector candidate = proposal;
            double f_new = objective(candidate, lambda);
            int halvings = 0;
            while (f_new > f_old + 1e-13 * std::abs(f_old) && halvings < 40) {
                step *= 0.5;
                candidate = gamma + step * direction;
                f_new = objective(candidate, lambda);
                ++halvings;
            }
            if (f_new > f_old + 1e-13 * std::abs(f_old)) {
                converged = true;  // no descent left along the Newton direction
                break;
            }
            const double move = (candidate - gamma).cwiseAbs().maxCoeff();
            gamma = candidate;
            f_old = f_new;
            if (move < control.tolerance) {
                converged = true;
                break;
            }
        }
        if (!converged) {
            throw Error(ErrorCode::NoConvergence,
                        "logistic lasso did not converge in " + std::to_string(control.max_outer) + " iterations");
        }
        out.gamma = gamma;
        out.iterations = outer;
        out.active_set = nonzero_indices(gamma, 1);
        out.deviance = mean_nll(gamma);
        out.kkt_residual = kkt_residual(gamma, lambda);
        return out;
    }

    std::vector<LogitLassoFit> path(const std::vector<double>& grid) const {
        std::vector<LogitLassoFit> fits;
        fits.reserve(grid.size());
        std::optional<Vector> warm;
        for (double lambda : grid) {
            fits.push_back(fit(lambda, warm));
            warm = fits.back().gamma;
        }
        return fits;
    }

    /// Sum over subjects of the negative log-likelihood at gamma.
    static double total_nll(const Matrix& Z, const Vector& D, const Vector& gamma) {
        const Vector eta = linear_predictor_with_intercept(Z, gamma);
        double s = 0.0;
        for (Index i = 0; i < Z.rows(); ++i) {
            const double e = clamp_link(eta(i));
            s += softplus(e) - D(i) * e;
        }
        return s;
    }

private:
    const Matrix& z_;
    const Vector& d_;
    Matrix zsq_;
    Vector scale_;
};

inline LogitLassoFit fit_logit_lasso(const Matrix& Z, const Vector& D, double lambda,
                                     const std::optional<Vector>& init = std::nullopt,
                                     const LogitControl& control = {}, bool standardize = true) {
    return LogitLassoProblem(Z, D, standardize).fit(lambda, init, control);
}

inline double logit_lambda_max(const Matrix& Z, const Vector& D, bool standardize = true) {
    return LogitLassoProblem(Z, D, standardize).lambda_max();
}

struct LogitCvOptions {
    int n_lambdas = 100;
    double lambda_min_ratio = 0.05;
    bool standardize = true;
    // Stop the grid once the CV loss has not improved for this many points; 0 runs it all.
    int patience = 10;
};

struct LogitCvResult {
    double lambda_star = 0.0;
    LogitLassoFit fit;
    std::vector<double> lambdas;  // the grid points actually evaluated
    std::vector<double> cv_loss;
};

/// Folds stratified by D; the summed out-of-fold negative log-likelihood picks lambda.
inline LogitCvResult select_lambda_cv_logit(const Matrix& Z, const Vector& D, int folds, std::uint64_t seed,
                                            const LogitCvOptions& options = {}) {
    if (folds < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 folds");
    const auto members = fold_members(stratified_fold_assignment(D, folds, seed));
    if (static_cast<int>(members.size()) != folds) throw Error(ErrorCode::FoldTooSmall, "empty fold");

    const LogitLassoProblem full(Z, D, options.standardize);
    const double lmax = full.lambda_max();
    if (lmax == 0.0 && (D.mean() == 0.0 || D.mean() == 1.0)) {
        throw Error(ErrorCode::SingleClassFold, "only one treatment class present");
    }
    const auto grid = lambda_grid(lmax, options.n_lambdas, options.lambda_min_ratio);

    auto rows_of = [&](const IndexList& rows, Matrix& z, Vector& d) {
        z.resize(static_cast<Index>(rows.size()), Z.cols());
        d.resize(static_cast<Index>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            z.row(static_cast<Index>(r)) = Z.row(rows[r]);
            d(static_cast<Index>(r)) = D(rows[r]);
        }
    };
    struct Fold {
        Matrix z_train, z_test;
        Vector d_train, d_test;
        std::optional<Vector> warm;
    };
    std::vector<Fold> cv(members.size());
    std::vector<LogitLassoProblem> problems;
    problems.reserve(members.size());
    for (std::size_t j = 0; j < members.size(); ++j) {
        rows_of(complement(members[j], Z.rows()), cv[j].z_train, cv[j].d_train);
        rows_of(members[j], cv[j].z_test, cv[j].d_test);
        const double share = cv[j].d_train.mean();
        if (share == 0.0 || share == 1.0) {
            throw Error(ErrorCode::SingleClassFold, "a training split contains a single treatment class");
        }
        problems.emplace_back(cv[j].z_train, cv[j].d_train, options.standardize);
    }

    LogitCvResult out;
    std::size_t best = 0;
    for (std::size_t m = 0; m < grid.size(); ++m) {
        double loss = 0.0;
        for (std::size_t j = 0; j < cv.size(); ++j) {
            const LogitLassoFit fit = problems[j].fit(grid[m], cv[j].warm);
            cv[j].warm = fit.gamma;
            loss += LogitLassoProblem::total_nll(cv[j].z_test, cv[j].d_test, fit.gamma);
        }
        out.lambdas.push_back(grid[m]);
        out.cv_loss.push_back(loss);
        if (loss < out.cv_loss[best]) best = m;
        if (options.patience > 0 && m - best >= static_cast<std::size_t>(options.patience)) break;
    }
    out.lambda_star = out.lambdas[best];
    std::optional<Vector> warm;
    for (std::size_t m = 0; m <= best; ++m) {
        out.fit = full.fit(out.lambdas[m], warm);
        warm = out.fit.gamma;
    }
    return out;
}

}  // namespace hazdiff
