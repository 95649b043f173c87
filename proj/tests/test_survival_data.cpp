#include "hazdiff/survival_data.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

using namespace hazdiff;

namespace {

SurvivalDataset from_csv(const std::string& text, std::optional<double> tau = std::nullopt) {
    std::istringstream in(text);
    return read_csv(in, tau);
}

ErrorCode csv_error(const std::string& text) {
    try {
        from_csv(text);
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an error";
    return ErrorCode::IoError;
}

}  // namespace

TEST(SurvivalData, LoadsThreeRows) {
    const auto d = from_csv("time,status,treatment,z1\n1.0,1,1,0.1\n2.0,0,0,-0.2\n0.5,1,1,0.3\n");
    EXPECT_EQ(d.n(), 3);
    EXPECT_EQ(d.p(), 1);
    EXPECT_DOUBLE_EQ(d.tau(), 2.0);
    EXPECT_DOUBLE_EQ(d.covariates()(1, 0), -0.2);
    EXPECT_TRUE(d.treated(0));
    EXPECT_FALSE(d.event(1));
}

TEST(SurvivalData, RejectsBadInput) {
    EXPECT_EQ(csv_error("time,status,treatment,z1\n1,2,1,0\n2,0,0,1\n"), ErrorCode::NonBinaryColumn);
    EXPECT_EQ(csv_error("time,status,treatment,z1\n1,1,3,0\n2,0,0,1\n"), ErrorCode::NonBinaryColumn);
    EXPECT_EQ(csv_error("time,state,treatment,z1\n1,1,1,0\n2,0,0,1\n"), ErrorCode::MalformedHeader);
    EXPECT_EQ(csv_error("time,status,treatment\n1,1,1\n2,0,0\n"), ErrorCode::MalformedHeader);
    EXPECT_EQ(csv_error("time,status,treatment,z1\n1,1,1,nan\n2,0,0,1\n"), ErrorCode::NonFiniteValue);
    EXPECT_EQ(csv_error("time,status,treatment,z1\n"), ErrorCode::EmptyDataset);
}

TEST(SurvivalData, MissingColumnIsNamed) {
    try {
        from_csv("time,treatment,z1\n1,1,0\n2,0,1\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MalformedHeader);
        EXPECT_NE(std::string(e.what()).find("status"), std::string::npos);
    }
}

TEST(SurvivalData, TruncatesAtTau) {
    const auto d = from_csv("time,status,treatment,z1\n5.0,1,1,0\n1.0,1,0,1\n", 2.0);
    EXPECT_DOUBLE_EQ(d.time(0), 2.0);
    EXPECT_FALSE(d.event(0));
    EXPECT_TRUE(d.event(1));
}

TEST(SurvivalData, LoadCsvMissingFile) {
    try {
        load_csv("/nonexistent/file.csv");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::IoError);
    }
}

TEST(RiskSetIndex, AllEvents) {
    const SurvivalDataset d(Vector{{1, 2, 3}}, Vector{{1, 1, 1}}, Vector{{1, 0, 1}}, Matrix::Zero(3, 1));
    const RiskSetIndex idx(d);
    EXPECT_EQ(idx.event_times(), (std::vector<double>{1, 2, 3}));
    EXPECT_EQ(idx.at_risk_counts(), (std::vector<Index>{3, 2, 1}));
}

TEST(RiskSetIndex, TiesWithCensoring) {
    const SurvivalDataset d(Vector{{1, 1, 2}}, Vector{{1, 0, 1}}, Vector{{1, 0, 1}}, Matrix::Zero(3, 1));
    const RiskSetIndex idx(d);
    EXPECT_EQ(idx.event_times(), (std::vector<double>{1, 2}));
    EXPECT_EQ(idx.at_risk_counts(), (std::vector<Index>{3, 1}));
    for (double t : {0.0, 0.5, 1.0, 1.5, 2.0, 2.5}) {
        EXPECT_EQ(static_cast<double>(idx.at_risk_at(t)), oracle::at_risk_count(d, t)) << t;
    }
}

TEST(RiskSetIndex, NoEvents) {
    const SurvivalDataset d(Vector{{1, 2}}, Vector{{0, 0}}, Vector{{1, 0}}, Matrix::Zero(2, 1));
    const RiskSetIndex idx(d);
    EXPECT_TRUE(idx.event_times().empty());
    EXPECT_TRUE(nelson_aalen(idx).knots().empty());
}

TEST(RiskSetIndex, MatchesCountingOnRandomData) {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 50; ++rep) {
        const auto d = oracle::random_dataset(rng, 2 + rep % 49, 2);
        const RiskSetIndex idx(d);
        auto bp = oracle::breakpoints(d);
        std::vector<double> probes;
        for (std::size_t s = 0; s < bp.size(); ++s) {
            probes.push_back(bp[s]);
            if (s + 1 < bp.size()) probes.push_back(0.5 * (bp[s] + bp[s + 1]));
        }
        probes.push_back(bp.back() + 1.0);
        for (double t : probes) EXPECT_EQ(static_cast<double>(idx.at_risk_at(t)), oracle::at_risk_count(d, t));
        const auto counts = idx.at_risk_counts();
        for (std::size_t k = 1; k < counts.size(); ++k) EXPECT_LE(counts[k], counts[k - 1]);
        // N_i(tau) = delta_i: the aggregate counting process ends at the number of events.
        const auto n = counting_process(idx);
        const double total = n.knots().empty() ? 0.0 : n(d.tau());
        EXPECT_DOUBLE_EQ(total, d.events().sum());
    }
}

TEST(StepFunction, RightContinuous) {
    const auto f = StepFunction::from_increments({1.0, 2.0}, {0.5, -0.25});
    EXPECT_EQ(f(0.999), 0.0);
    EXPECT_EQ(f(1.0), 0.5);
    EXPECT_EQ(f(1.5), 0.5);
    EXPECT_EQ(f(2.0), 0.25);
    EXPECT_DOUBLE_EQ(f.total_variation(), 0.75);
    EXPECT_THROW(StepFunction({2.0, 1.0}, {0.0, 0.0}), Error);
}

TEST(StepFunction, IntegrateMatchesKnotSum) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::vector<double> knots, inc;
    for (int k = 0; k < 20; ++k) {
        knots.push_back(0.25 * (k + 1));
        inc.push_back(unif(rng));
    }
    const auto f = StepFunction::from_increments(knots, inc);
    auto g = [](double t) { return t < 2.0 ? 1.0 : -3.0; };
    double brute = 0.0;
    for (std::size_t k = 0; k < knots.size(); ++k) brute += g(knots[k]) * inc[k];
    EXPECT_NEAR(f.integrate(g), brute, 1e-12);
}

TEST(StepFunction, NelsonAalen) {
    const SurvivalDataset d(Vector{{1, 2, 3}}, Vector{{1, 1, 1}}, Vector{{1, 0, 1}}, Matrix::Zero(3, 1));
    const auto na = nelson_aalen(RiskSetIndex(d));
    EXPECT_DOUBLE_EQ(na(1.0), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(na(2.0), 1.0 / 3.0 + 0.5);
    EXPECT_DOUBLE_EQ(na(3.0), 1.0 / 3.0 + 0.5 + 1.0);
}

TEST(SurvivalData, SubsetKeepsTau) {
    const SurvivalDataset d(Vector{{1, 2, 3}}, Vector{{1, 0, 1}}, Vector{{1, 0, 1}}, Matrix::Identity(3, 2), 4.0);
    const IndexList rows{2, 0};
    const auto s = d.subset(rows);
    EXPECT_EQ(s.n(), 2);
    EXPECT_DOUBLE_EQ(s.tau(), 4.0);
    EXPECT_DOUBLE_EQ(s.time(0), 3.0);
}
