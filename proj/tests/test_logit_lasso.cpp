#include "hazdiff/logit_lasso.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace hazdiff;

namespace {

void logistic_data(std::mt19937_64& rng, Index n, Index p, const Vector& slopes, double intercept, Matrix& z,
                   Vector& d) {
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif;
    z.resize(n, p);
    d.resize(n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < p; ++j) z(i, j) = normal(rng);
        const double lin = intercept + z.row(i).head(slopes.size()).dot(slopes);
        d(i) = unif(rng) < oracle::expit(lin) ? 1.0 : 0.0;
    }
    d(0) = 1.0;
    d(1) = 0.0;
}

}  // namespace

TEST(LogitLasso, InterceptOnlyAboveLambdaMax) {
    std::mt19937_64 rng(1);
    Matrix z;
    Vector d;
    logistic_data(rng, 50, 4, Vector{{1.0}}, 0.3, z, d);
    const LogitLassoProblem problem(z, d);
    const double lmax = problem.lambda_max();
    Vector centered = d.array() - d.mean();
    const Vector sd = (z.rowwise() - z.colwise().mean()).colwise().norm() / std::sqrt(50.0);
    EXPECT_NEAR(lmax, ((z.transpose() * centered).array() / sd.array()).abs().maxCoeff() / 50.0, 1e-12);
    EXPECT_DOUBLE_EQ(logit_lambda_max(z, d, false), (z.transpose() * centered).cwiseAbs().maxCoeff() / 50.0);
    const auto fit = problem.fit(lmax);
    EXPECT_TRUE(fit.active_set.empty());
    EXPECT_NEAR(fit.gamma(0), logit(d.mean()), 1e-8);
}

TEST(LogitLasso, MatchesNewtonAtZeroPenalty) {
    const Matrix z{{-1.0}, {-0.5}, {0.2}, {0.4}, {1.1}, {2.0}};
    const Vector d{{0, 1, 0, 1, 0, 1}};
    const auto fit = fit_logit_lasso(z, d, 0.0);
    const Vector g = oracle::logistic_newton(z, d);
    EXPECT_LT((fit.gamma - g).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(LogitLasso, KktOnRandomInstances) {
    std::mt19937_64 rng(2);
    for (int rep = 0; rep < 40; ++rep) {
        Matrix z;
        Vector d;
        const Index p = 2 + rep % 10;
        logistic_data(rng, 30 + rep, p, Vector{{0.8, -0.5}}, -0.2, z, d);
        const LogitLassoProblem problem(z, d);
        const Vector scale = column_scales(z);
        for (double frac : {0.8, 0.3, 0.1}) {
            const double lambda = frac * problem.lambda_max();
            const auto fit = problem.fit(lambda);
            EXPECT_LE(fit.kkt_residual, 1e-5);
            const Vector g = problem.gradient(fit.gamma);
            EXPECT_LE(std::abs(g(0)), 1e-5);
            for (Index j = 1; j <= p; ++j) {
                const double pen = lambda * scale(j - 1);
                if (fit.gamma(j) == 0.0) {
                    EXPECT_LE(std::abs(g(j)), pen + 1e-5);
                } else {
                    EXPECT_NEAR(g(j), -pen * (fit.gamma(j) > 0 ? 1.0 : -1.0), 1e-5);
                }
            }
            const Vector ps = fit.propensities(z);
            EXPECT_GT(ps.minCoeff(), 0.0);
            EXPECT_LT(ps.maxCoeff(), 1.0);
        }
    }
}

TEST(LogitLasso, StandardizedFitEqualsRawFitOnScaledColumns) {
    std::mt19937_64 rng(4);
    Matrix z;
    Vector d;
    logistic_data(rng, 80, 5, Vector{{0.9, -0.6}}, 0.1, z, d);
    const Vector stretch{{3.0, 0.2, 1.0, 7.0, 0.5}};
    z = z * stretch.asDiagonal();
    const Vector sd = column_scales(z);
    const Matrix unit = z * sd.cwiseInverse().asDiagonal();
    const double lambda = 0.3 * logit_lambda_max(z, d);
    const auto a = fit_logit_lasso(z, d, lambda);
    const auto b = fit_logit_lasso(unit, d, lambda, std::nullopt, {}, false);
    EXPECT_NEAR(a.gamma(0), b.gamma(0), 1e-6);
    for (Index j = 0; j < 5; ++j) EXPECT_NEAR(a.gamma(j + 1) * sd(j), b.gamma(j + 1), 1e-6) << j;
}

TEST(LogitLasso, WarmStartReachesSameSolution) {
    std::mt19937_64 rng(3);
    Matrix z;
    Vector d;
    logistic_data(rng, 80, 6, Vector{{1.0, 0.5}}, 0.0, z, d);
    const LogitLassoProblem problem(z, d);
    const double lambda = 0.05 * problem.lambda_max();
    const auto cold = problem.fit(lambda);
    const auto warm = problem.fit(lambda, problem.fit(0.5 * problem.lambda_max()).gamma);
    EXPECT_NEAR(problem.objective(cold.gamma, lambda), problem.objective(warm.gamma, lambda), 1e-10);
}

TEST(LogitLasso, SingleClassIsSeparation) {
    const Matrix z{{0.1}, {0.2}, {0.3}};
    const Vector d{{1, 1, 1}};
    const auto fit = fit_logit_lasso(z, d, 0.1);
    EXPECT_TRUE(fit.separation);
    EXPECT_THROW(select_lambda_cv_logit(z, d, 2, 1), Error);
}

TEST(LogitLasso, RejectsNonBinary) {
    const Matrix z{{0.1}, {0.2}};
    EXPECT_THROW(fit_logit_lasso(z, Vector{{0.0, 0.5}}, 0.1), Error);
}

TEST(LogitCv, DeterministicSmallBalanced) {
    const Matrix z{{-1.0, 0.1}, {-0.5, 0.3}, {0.2, -0.2}, {0.4, 0.9}, {1.1, -1.0}, {2.0, 0.0}, {0.3, 0.3}, {-0.3, 1.2}};
    const Vector d{{0, 1, 0, 1, 0, 1, 1, 0}};
    const auto a = select_lambda_cv_logit(z, d, 2, 5);
    const auto b = select_lambda_cv_logit(z, d, 2, 5);
    EXPECT_EQ(a.lambda_star, b.lambda_star);
    EXPECT_EQ(a.fit.gamma, b.fit.gamma);
}

TEST(LogitCv, SelectedLossIsMinimum) {
    std::mt19937_64 rng(4);
    Matrix z;
    Vector d;
    logistic_data(rng, 120, 8, Vector{{1.0}}, 0.0, z, d);
    LogitCvOptions options;
    options.patience = 0;
    const auto cv = select_lambda_cv_logit(z, d, 5, 9, options);
    const double chosen = cv.cv_loss[static_cast<std::size_t>(
        std::find(cv.lambdas.begin(), cv.lambdas.end(), cv.lambda_star) - cv.lambdas.begin())];
    EXPECT_LE(chosen, cv.cv_loss.front());
    EXPECT_LE(chosen, cv.cv_loss.back());
}

TEST(LogitCv, IndependentTreatmentSelectsNearInterceptOnly) {
    int near = 0;
    for (int rep = 0; rep < 50; ++rep) {
        std::mt19937_64 rng(500 + rep);
        Matrix z;
        Vector d;
        logistic_data(rng, 100, 10, Vector::Zero(1), 0.0, z, d);
        LogitCvOptions options;
        options.patience = 0;
        const auto cv = select_lambda_cv_logit(z, d, 10, static_cast<std::uint64_t>(rep), options);
        const auto pos = std::find(cv.lambdas.begin(), cv.lambdas.end(), cv.lambda_star) - cv.lambdas.begin();
        if (pos <= 1) ++near;
    }
    EXPECT_GT(near, 25);
}
