#include "hazdiff/ahaz_lasso.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace hazdiff;

TEST(BuildQuadratic, NoEventsGivesZeroLinearTerm) {
    const SurvivalDataset d(Vector{{1, 1}}, Vector{{0, 0}}, Vector{{1, 0}}, Matrix{{0.3}, {-1.0}});
    try {
        const auto q = build_quadratic(d, RiskSetIndex(d), false);
        EXPECT_EQ(q.h(0), 0.0);
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DegenerateDesign);
    }
}

TEST(BuildQuadratic, ConstantCovariateIsAnnihilated) {
    std::mt19937_64 rng(2);
    auto d0 = oracle::random_dataset(rng, 12, 2);
    Matrix z = d0.covariates();
    z.col(1).setConstant(3.5);
    const SurvivalDataset d(d0.times(), d0.events(), d0.treatments(), z);
    const auto q = build_quadratic(d, RiskSetIndex(d), true);
    EXPECT_NEAR(q.H.row(2).cwiseAbs().maxCoeff(), 0.0, 1e-12);
    EXPECT_NEAR(q.H.col(2).cwiseAbs().maxCoeff(), 0.0, 1e-12);
    EXPECT_NEAR(q.h(2), 0.0, 1e-12);
}

TEST(BuildQuadratic, MatchesSegmentOracle) {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 60; ++rep) {
        const auto d = oracle::random_dataset(rng, 3 + rep % 18, 1 + rep % 4, rep % 2 == 0);
        for (bool with_d : {false, true}) {
            const auto q = build_quadratic(d, RiskSetIndex(d), with_d);
            Matrix H;
            Vector h;
            oracle::quadratic(d, with_d, H, h);
            EXPECT_LT((q.H - H).cwiseAbs().maxCoeff(), 1e-12);
            EXPECT_LT((q.h - h).cwiseAbs().maxCoeff(), 1e-12);
            EXPECT_LT((q.H - q.H.transpose()).cwiseAbs().maxCoeff(), 1e-15);
            std::normal_distribution<double> normal;
            for (int probe = 0; probe < 5; ++probe) {
                Vector x(q.dim());
                for (Index j = 0; j < x.size(); ++j) x(j) = normal(rng);
                EXPECT_GE(x.dot(q.H * x), -1e-12);
            }
        }
    }
}

TEST(BuildQuadratic, HandInstanceN3) {
    // times 1, 2, 3; Z = 0, 1, 2; events at 1 and 3.
    const SurvivalDataset d(Vector{{1, 2, 3}}, Vector{{1, 0, 1}}, Vector{{0, 1, 0}}, Matrix{{0.0}, {1.0}, {2.0}});
    const auto q = build_quadratic(d, RiskSetIndex(d), false);
    // (0,1]: all at risk, mean 1, sum sq dev 2; (1,2]: {1,2}, mean 1.5, 0.5; (2,3]: {2}, 0.
    EXPECT_NEAR(q.H(0, 0), (2.0 + 0.5) / 3.0, 1e-15);
    // event at 1: 0 - 1; event at 3: 2 - 2.
    EXPECT_NEAR(q.h(0), -1.0 / 3.0, 1e-15);
}

namespace {

AhazQuadratic random_quadratic(std::mt19937_64& rng, Index dim, bool with_treatment = false) {
    std::normal_distribution<double> normal;
    Matrix a(dim + 3, dim);
    for (Index r = 0; r < a.rows(); ++r) {
        for (Index c = 0; c < dim; ++c) a(r, c) = normal(rng);
    }
    AhazQuadratic q;
    q.H = a.transpose() * a / static_cast<double>(a.rows());
    q.h = Vector(dim);
    for (Index j = 0; j < dim; ++j) q.h(j) = normal(rng);
    q.includes_treatment = with_treatment;
    return q;
}

}  // namespace

TEST(FitLasso, ZeroAboveLambdaMax) {
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 20; ++rep) {
        const auto q = random_quadratic(rng, 5);
        const double lmax = lambda_max(q);
        EXPECT_DOUBLE_EQ(lmax, q.h.cwiseAbs().maxCoeff());
        const auto fit = fit_lasso(q, lmax);
        EXPECT_TRUE(fit.active_set.empty());
        EXPECT_EQ(fit.coef.cwiseAbs().maxCoeff(), 0.0);
    }
}

TEST(FitLasso, DenseSolveAtZeroPenalty) {
    std::mt19937_64 rng(8);
    for (int rep = 0; rep < 20; ++rep) {
        const auto q = random_quadratic(rng, 2);
        const auto fit = fit_lasso(q, 0.0);
        const Vector direct = q.H.ldlt().solve(q.h);
        EXPECT_LT((fit.coef - direct).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(FitLasso, MatchesSignEnumeration) {
    std::mt19937_64 rng(9);
    for (int rep = 0; rep < 50; ++rep) {
        const auto q = random_quadratic(rng, 2);
        for (double lambda : {0.01, 0.1, 0.3}) {
            const auto fit = fit_lasso(q, lambda);
            const Vector b = oracle::lasso_p2(q.H, q.h, lambda);
            EXPECT_LT((fit.coef - b).cwiseAbs().maxCoeff(), 1e-6);
        }
    }
}

TEST(FitLasso, KktOnRandomData) {
    std::mt19937_64 rng(10);
    for (int rep = 0; rep < 40; ++rep) {
        const auto d = oracle::random_dataset(rng, 10 + rep % 31, 1 + rep % 8);
        for (bool with_d : {false, true}) {
            const auto q = build_quadratic(d, RiskSetIndex(d), with_d);
            const double lmax = lambda_max(q, true);
            for (double frac : {0.9, 0.5, 0.1, 0.01}) {
                const auto fit = fit_lasso(q, frac * lmax, true);
                EXPECT_LE(fit.kkt_residual, 1e-6);
                const Vector grad = q.h - q.H * fit.coef;
                for (Index j = 0; j < q.dim(); ++j) {
                    if (std::find(fit.pinned.begin(), fit.pinned.end(), j) != fit.pinned.end()) continue;
                    const double pen = frac * lmax * q.scale(j);
                    if (fit.coef(j) == 0.0) {
                        EXPECT_LE(std::abs(grad(j)), pen + 1e-6);
                    } else {
                        EXPECT_NEAR(grad(j), pen * (fit.coef(j) > 0 ? 1.0 : -1.0), 1e-6);
                    }
                }
            }
        }
    }
}

TEST(FitLasso, StandardizedFitEqualsRawFitOnScaledColumns) {
    std::mt19937_64 rng(12);
    const auto d = oracle::random_dataset(rng, 40, 4, false);
    const Vector stretch{{4.0, 0.25, 1.0, 9.0}};
    const Matrix wide = d.covariates() * stretch.asDiagonal();
    const SurvivalDataset raw(d.times(), d.events(), d.treatments(), wide);
    const Vector sd = column_scales(wide);
    const SurvivalDataset unit(d.times(), d.events(), d.treatments(), wide * sd.cwiseInverse().asDiagonal());
    const auto qa = build_quadratic(raw, RiskSetIndex(raw), false);
    const auto qb = build_quadratic(unit, RiskSetIndex(unit), false, false);
    EXPECT_NEAR(lambda_max(qa), lambda_max(qb), 1e-12);
    const double lambda = 0.2 * lambda_max(qa);
    const auto a = fit_lasso(qa, lambda);
    const auto b = fit_lasso(qb, lambda);
    for (Index j = 0; j < 4; ++j) EXPECT_NEAR(a.coef(j) * sd(j), b.coef(j), 1e-8) << j;
}

TEST(FitLasso, UnpenalizedTreatment) {
    std::mt19937_64 rng(12);
    const auto d = oracle::random_dataset(rng, 40, 3);
    const auto q = build_quadratic(d, RiskSetIndex(d), true);
    const auto fit = fit_lasso(q, 1e6, false);
    ASSERT_TRUE(fit.theta_l);
    EXPECT_NEAR(*fit.theta_l, q.h(0) / q.H(0, 0), 1e-10);
    EXPECT_EQ(fit.beta.cwiseAbs().maxCoeff(), 0.0);
}

TEST(FitLasso, ZeroDiagonalIsPinned) {
    AhazQuadratic q;
    q.H = Matrix{{1.0, 0.0}, {0.0, 0.0}};
    q.h = Vector{{0.5, 0.2}};
    const auto fit = fit_lasso(q, 0.0);
    EXPECT_EQ(fit.pinned, (IndexList{1}));
    EXPECT_EQ(fit.coef(1), 0.0);
    EXPECT_NEAR(fit.coef(0), 0.5, 1e-12);
}

TEST(FitLasso, RejectsNegativeLambda) {
    std::mt19937_64 rng(13);
    EXPECT_THROW(fit_lasso(random_quadratic(rng, 2), -1.0), Error);
}

TEST(FitLasso, CovariateOnlyEqualsDroppingTreatment) {
    std::mt19937_64 rng(14);
    const auto d = oracle::random_dataset(rng, 30, 3);
    const auto q1 = build_quadratic(d, RiskSetIndex(d), false);
    Vector other = d.treatments();
    other.reverseInPlace();
    const SurvivalDataset d2(d.times(), d.events(), other, d.covariates());
    const auto q2 = build_quadratic(d2, RiskSetIndex(d2), false);
    EXPECT_EQ((q1.H - q2.H).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(fit_lasso(q1, 0.01).beta, fit_lasso(q2, 0.01).beta);
}

TEST(LassoPath, EndpointsAndMonotoneLoss) {
    std::mt19937_64 rng(15);
    const auto d = oracle::random_dataset(rng, 40, 5);
    const auto q = build_quadratic(d, RiskSetIndex(d), false);
    const auto two = lasso_path(q, 2, 1.0);
    ASSERT_EQ(two.size(), 2u);
    EXPECT_TRUE(two[0].active_set.empty());
    EXPECT_TRUE(two[1].active_set.empty());

    const auto path = lasso_path(q, 30, 0.01);
    EXPECT_TRUE(path.front().active_set.empty());
    EXPECT_GE(path.back().active_set.size(), path.front().active_set.size());
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& f : path) {
        const double loss = 0.5 * f.coef.dot(q.H * f.coef) - f.coef.dot(q.h);
        EXPECT_LE(loss, prev + 1e-12);
        prev = loss;
    }
}

TEST(SelectLambdaCv, DeterministicAndLeaveOneOut) {
    std::mt19937_64 rng(16);
    const auto d = oracle::random_dataset(rng, 60, 4);
    const auto a = select_lambda_cv(d, 5, 42);
    const auto b = select_lambda_cv(d, 5, 42);
    EXPECT_EQ(a.lambda_star, b.lambda_star);
    EXPECT_EQ(a.fit.coef, b.fit.coef);

    const auto small = oracle::random_dataset(rng, 10, 2);
    const SurvivalDataset five = small.subset(IndexList{0, 1, 2, 3, 4});
    const auto loo = select_lambda_cv(five, 5, 1);
    EXPECT_GT(loo.lambda_star, 0.0);
    const SurvivalDataset two = small.subset(IndexList{0, 1});
    EXPECT_THROW(select_lambda_cv(two, 2, 1), Error);
}

TEST(SelectLambdaCv, SelectedLossIsGridMinimum) {
    std::mt19937_64 rng(17);
    const auto d = oracle::random_dataset(rng, 80, 6);
    AhazCvOptions options;
    options.patience = 0;
    const auto cv = select_lambda_cv(d, 4, 3, options);
    ASSERT_EQ(cv.cv_loss.size(), 100u);
    const auto best = std::min_element(cv.cv_loss.begin(), cv.cv_loss.end()) - cv.cv_loss.begin();
    EXPECT_EQ(cv.lambda_star, cv.lambdas[static_cast<std::size_t>(best)]);
    EXPECT_EQ(cv.fit.lambda, cv.lambda_star);
}

TEST(SelectLambdaCv, EarlyStopKeepsTheMinimum) {
    std::mt19937_64 rng(18);
    for (int rep = 0; rep < 5; ++rep) {
        const auto d = oracle::random_dataset(rng, 80, 10, false);
        AhazCvOptions full;
        full.patience = 0;
        const auto a = select_lambda_cv(d, 5, 7, full);
        const auto b = select_lambda_cv(d, 5, 7);
        for (std::size_t m = 0; m < b.cv_loss.size(); ++m) EXPECT_EQ(a.cv_loss[m], b.cv_loss[m]);
        const auto best = std::min_element(a.cv_loss.begin(), a.cv_loss.end()) - a.cv_loss.begin();
        if (static_cast<std::size_t>(best) < b.cv_loss.size()) {
            EXPECT_EQ(a.lambda_star, b.lambda_star);
        }
    }
}

TEST(SelectLambdaCv, NullCovariatesGiveSparseFits) {
    // beta = 0: exponential times independent of Z.
    int sparse_wins = 0;
    double active = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        std::mt19937_64 rng(1000 + rep);
        std::normal_distribution<double> normal;
        std::exponential_distribution<double> expo(1.0);
        std::uniform_real_distribution<double> unif;
        const Index n = 100, p = 10;
        Vector t(n), e(n), dd(n);
        Matrix z(n, p);
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < p; ++j) z(i, j) = normal(rng);
            const double c = 2.0 * unif(rng);
            const double tt = expo(rng);
            t(i) = std::min(tt, c);
            e(i) = tt <= c ? 1.0 : 0.0;
            dd(i) = i % 2;
        }
        const SurvivalDataset d(t, e, dd, z);
        AhazCvOptions options;
        options.patience = 0;
        const auto cv = select_lambda_cv(d, 10, static_cast<std::uint64_t>(rep), options);
        if (cv.cv_loss.front() <= cv.cv_loss.back()) ++sparse_wins;
        active += static_cast<double>(cv.fit.active_set.size());
    }
    EXPECT_GT(sparse_wins, 25);
    EXPECT_LT(active / 50.0, 3.0);
}
