#include "hazdiff/simulation.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace hazdiff;

namespace {

CalibrationControl small_pilot() {
    CalibrationControl c;
    c.pilot_size = 20000;
    return c;
}

StudyConfig tiny_study(int workers) {
    StudyConfig c;
    c.reps = 4;
    c.seed = 3;
    c.workers = workers;
    c.methods = {Method::NaiveLasso, Method::Hdi, Method::HdiCf};
    c.estimator.k = 3;
    c.estimator.nuisance.cv_folds = 3;
    c.estimator.nuisance.n_lambdas = 20;
    c.calibration = small_pilot();
    return c;
}

}  // namespace

TEST(Scenario, Templates) {
    EXPECT_EQ(beta_template(2, 4), (Vector{{1.0, 0.1, 0.0, 0.0}}));
    const Vector b6 = beta_template(6, 8);
    EXPECT_EQ(b6(0), 1.0);
    EXPECT_EQ(b6.segment(1, 5), Vector::Constant(5, 0.1));
    EXPECT_EQ(b6.tail(2), Vector::Zero(2));
    EXPECT_EQ(nonzero_indices(beta_template(15, 20)).size(), 15u);
    const Vector b30 = beta_template(30, 40);
    EXPECT_EQ(nonzero_indices(b30).size(), 30u);
    EXPECT_EQ(b30.head(4), Vector::Ones(4));

    EXPECT_EQ(gamma_template(1, 3), (Vector{{1.0, 0.0, 0.0}}));
    EXPECT_EQ(gamma_template(3, 4), (Vector{{1.0, 0.05, 0.05, 0.0}}));
    const Vector g10 = gamma_template(10, 12);
    EXPECT_EQ(g10.head(2), Vector::Ones(2));
    EXPECT_EQ(g10.segment(2, 8), Vector::Constant(8, 0.05));
    EXPECT_EQ(nonzero_indices(gamma_template(20, 30)).size(), 20u);
}

TEST(Scenario, NamedScenarios) {
    EXPECT_EQ(make_scenario("E", 15, 10, 50, 20).outcome, OutcomeModel::ExponentialLink);
    EXPECT_EQ(make_scenario("E", 15, 10, 50, 20).s_beta, 2);
    EXPECT_EQ(make_scenario("P", 2, 1, 50, 20).treatment, TreatmentModel::Probit);
    EXPECT_EQ(make_scenario("D", 2, 1, 50, 20).treatment, TreatmentModel::Deterministic);
    EXPECT_EQ(make_scenario("dense", 30, 1, 50, 40).s_beta, 30);
    EXPECT_THROW(make_scenario("nope", 2, 1, 50, 20), Error);
    EXPECT_THROW(make_scenario("sparse", 30, 1, 50, 10), Error);
}

TEST(Covariates, RejectionCondition) {
    const auto spec = make_scenario("sparse", 2, 1, 100, 6);
    Rng rng(1);
    const Index rows = 20000;
    const Matrix z = draw_covariates(spec, rows, rng);
    const Vector eta = z * spec.beta0;
    EXPECT_GE(eta.minCoeff(), 0.25);
    // beta0'Z ~ N(0, 1.01) truncated below at 0.25.
    const double sigma = std::sqrt(1.01);
    const double a = 0.25 / sigma;
    const double pdf = std::exp(-0.5 * a * a) / std::sqrt(2.0 * M_PI);
    const double mean = sigma * pdf / (1.0 - normal_cdf(a));
    const double sd = std::sqrt((eta.array() - eta.mean()).square().mean());
    EXPECT_NEAR(eta.mean(), mean, 4.0 * sd / std::sqrt(static_cast<double>(rows)));
    // Off-support coordinates stay standard normal.
    for (Index j = 2; j < 6; ++j) {
        EXPECT_NEAR(z.col(j).mean(), 0.0, 0.03);
        EXPECT_NEAR(z.col(j).squaredNorm() / rows, 1.0, 0.05);
    }
}

TEST(Covariates, RejectionStall) {
    auto spec = make_scenario("sparse", 2, 1, 10, 3);
    spec.beta0.setZero();
    RejectionControl control;
    control.max_proposals = 1000;
    Rng rng(2);
    try {
        draw_covariates(spec, 5, rng, control);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::RejectionStall);
    }
}

TEST(Treatment, MarginalProbabilityIsHalf) {
    for (const char* name : {"sparse", "P"}) {
        auto spec = make_scenario(name, 2, 1, 20000, 3);
        const auto cal = calibrate(spec, 4, small_pilot());
        Rng rng(5);
        const auto sim = simulate_dataset(spec, cal, rng);
        EXPECT_NEAR(sim.data.treatments().mean(), 0.5, 0.02) << name;
    }
}

TEST(Treatment, DeterministicScenario) {
    const auto spec = make_scenario("D", 2, 1, 200, 4);
    const auto cal = calibrate(spec, 6, small_pilot());
    Rng rng(7);
    const Matrix z = draw_covariates(spec, 200, rng);
    Rng a(8), b(9);
    const Vector d1 = assign_treatment(spec, cal, z, a);
    const Vector d2 = assign_treatment(spec, cal, z, b);
    EXPECT_EQ(d1, d2);
    for (Index i = 0; i < 200; ++i) EXPECT_EQ(d1(i), z(i, 0) > cal.mu ? 1.0 : 0.0);
}

TEST(Outcome, ExponentialTimes) {
    const auto spec = make_scenario("sparse", 2, 1, 40000, 3);
    Rng rng(10);
    const Matrix z = draw_covariates(spec, 40000, rng);
    Vector d(40000);
    for (Index i = 0; i < 40000; ++i) d(i) = static_cast<double>(i % 2);
    const Vector t = draw_outcome(spec, z, d, rng);
    const Vector eta = z * spec.beta0;
    double scaled = 0.0;
    for (Index i = 0; i < 40000; ++i) scaled += t(i) * hazard_rate(spec, eta(i), d(i));
    EXPECT_NEAR(scaled / 40000.0, 1.0, 0.02);
    EXPECT_DOUBLE_EQ(hazard_rate(spec, 0.25, 1.0), 0.25);

    const auto e = make_scenario("E", 2, 1, 10, 3);
    EXPECT_DOUBLE_EQ(hazard_rate(e, 0.0, 1.0), -0.25 + 1.0 + 0.25);
}

TEST(Calibration, InterceptVanishesUnderSymmetry) {
    // Treatment driven by a coordinate outside the rejection event, so it stays N(0, 1).
    auto spec = make_scenario("sparse", 2, 1, 100, 4);
    spec.gamma0 = Vector{{0.0, 0.0, 1.0, 0.0}};
    const auto cal = calibrate(spec, 11, small_pilot());
    EXPECT_NEAR(cal.intercept, 0.0, 0.03);
}

TEST(Calibration, MeetsTargetsOnDraws) {
    const auto spec = make_scenario("sparse", 2, 1, 300, 5);
    const auto cal = calibrate(spec, 12, small_pilot());
    EXPECT_NEAR(cal.censoring, 0.30, 0.005);
    EXPECT_NEAR(cal.atrisk_fraction, 0.10, 1e-6);
    EXPECT_GE(cal.c0, cal.tau);
    double censor = 0.0, at_risk = 0.0;
    const int reps = 100;
    for (int r = 0; r < reps; ++r) {
        Rng rng = make_rng(13, static_cast<std::uint64_t>(r));
        const auto sim = simulate_dataset(spec, cal, rng);
        const double c = 1.0 - sim.data.events().mean();
        EXPECT_GE(c, 0.20);
        EXPECT_LE(c, 0.40);
        censor += c;
        for (Index i = 0; i < sim.data.n(); ++i) {
            if (sim.data.treated(i) && sim.data.time(i) >= cal.tau) at_risk += 1.0;
        }
    }
    EXPECT_NEAR(censor / reps, 0.30, 0.01);
    EXPECT_NEAR(at_risk / reps, 30.0, 2.0);
}

TEST(Calibration, PilotTooSmall) {
    const auto spec = make_scenario("sparse", 2, 1, 300, 5);
    CalibrationControl c;
    c.pilot_size = 100;
    EXPECT_THROW(calibrate(spec, 1, c), Error);
}

TEST(Study, DeterministicAcrossWorkers) {
    const auto spec = make_scenario("sparse", 2, 1, 80, 10);
    const auto a = run_study(spec, tiny_study(1));
    const auto b = run_study(spec, tiny_study(3));
    EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
    std::ostringstream ca, cb;
    write_replications_csv(ca, a);
    write_replications_csv(cb, b);
    EXPECT_EQ(ca.str(), cb.str());
}

TEST(Study, SummaryMoments) {
    const auto spec = make_scenario("sparse", 2, 1, 80, 10);
    const auto s = run_study(spec, tiny_study(1));
    for (const auto& row : s.methods) {
        if (row.replications < 2) continue;
        const double r = row.replications;
        EXPECT_NEAR(row.rmse * row.rmse, row.bias * row.bias + row.sd * row.sd * (r - 1.0) / r, 1e-12);
        EXPECT_GE(row.coverage, 0.0);
        EXPECT_LE(row.coverage, 1.0);
        EXPECT_EQ(row.replications + row.divergent, s.reps);
    }
    EXPECT_THROW(s.row(Method::Score), Error);
}
