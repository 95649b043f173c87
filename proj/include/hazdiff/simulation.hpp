#pragma once

#include "hazdiff/common.hpp"
#include "hazdiff/diagnostics.hpp"
#include "hazdiff/error.hpp"
#include "hazdiff/estimators.hpp"
#include "hazdiff/parallel.hpp"
#include "hazdiff/report.hpp"
#include "hazdiff/rng.hpp"
#include "hazdiff/survival_data.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace hazdiff {

enum class OutcomeModel { Additive, ExponentialLink };
enum class TreatmentModel { Logistic, Probit, Deterministic };

struct ScenarioSpec {
    std::string name = "sparse";
    int s_beta = 2;
    int s_gamma = 1;
    Index n = 300;
    Index p = 300;
    double theta0 = -0.25;
    double lambda0 = 0.25;
    Vector beta0;
    Vector gamma0;  // slopes; the intercept is calibrated
    OutcomeModel outcome = OutcomeModel::Additive;
    TreatmentModel treatment = TreatmentModel::Logistic;
    double censor_target = 0.30;
    double atrisk_fraction = 0.10;  // expected treated at risk at tau, as a share of n
    double covariate_threshold = 0.25;
};

inline Vector beta_template(int s, Index p) {
    Vector b = Vector::Zero(p);
    auto fill = [&](Index from, Index count, double value) {
        for (Index j = from; j < from + count; ++j) b(j) = value;
    };
    switch (s) {
        case 2: fill(0, 1, 1.0); fill(1, 1, 0.1); break;
        case 6: fill(0, 1, 1.0); fill(1, 5, 0.1); break;
        case 15: fill(0, 1, 1.0); fill(1, 14, 0.1); break;
        case 30: fill(0, 4, 1.0); fill(4, 26, 0.1); break;
        default: throw Error(ErrorCode::InvalidArgument, "s_beta must be one of 2, 6, 15, 30");
    }
    return b;
}

inline Vector gamma_template(int s, Index p) {
    Vector g = Vector::Zero(p);
    auto fill = [&](Index from, Index count, double value) {
        for (Index j = from; j < from + count; ++j) g(j) = value;
    };
    switch (s) {
        case 1: fill(0, 1, 1.0); break;
        case 3: fill(0, 1, 1.0); fill(1, 2, 0.05); break;
        case 10: fill(0, 2, 1.0); fill(2, 8, 0.05); break;
        case 20: fill(0, 4, 1.0); fill(4, 16, 0.05); break;
        default: throw Error(ErrorCode::InvalidArgument, "s_gamma must be one of 1, 3, 10, 20");
    }
    return g;
}

/**
 * Named scenario. "sparse" and "dense" take the given sparsity pair; "E" (exponential
 * outcome link), "P" (probit treatment) and "D" (deterministic treatment) use (2, 1).
 */
inline ScenarioSpec make_scenario(const std::string& name, int s_beta, int s_gamma, Index n, Index p) {
    ScenarioSpec spec;
    spec.name = name;
    spec.n = n;
    spec.p = p;
    if (name == "E" || name == "P" || name == "D") {
        s_beta = 2;
        s_gamma = 1;
        if (name == "E") spec.outcome = OutcomeModel::ExponentialLink;
        if (name == "P") spec.treatment = TreatmentModel::Probit;
        if (name == "D") spec.treatment = TreatmentModel::Deterministic;
    } else if (name != "sparse" && name != "dense") {
        throw Error(ErrorCode::InvalidArgument, "unknown scenario '" + name + "'");
    }
    const int largest = std::max(s_beta, s_gamma);
    if (p < largest) throw Error(ErrorCode::InvalidArgument, "p is smaller than the scenario's support");
    spec.s_beta = s_beta;
    spec.s_gamma = s_gamma;
    spec.beta0 = beta_template(s_beta, p);
    spec.gamma0 = gamma_template(s_gamma, p);
    return spec;
}

/// Hazard rate of a subject with covariate index eta = beta0'Z and treatment d.
inline double hazard_rate(const ScenarioSpec& spec, double eta, double d) {
    if (spec.outcome == OutcomeModel::ExponentialLink) return spec.theta0 * d + std::exp(eta) + spec.lambda0;
    return spec.lambda0 + spec.theta0 * d + eta;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

struct Calibration {
    double tau = 0.0;
    double c0 = 0.0;
    double intercept = 0.0;
    double mu = 0.0;  // threshold of the deterministic assignment
    double censoring = 0.0;
    double atrisk_fraction = 0.0;
};

/// P(D = 1 | Z) implied by the scenario for the linear index gamma0'Z.
inline double treatment_probability(const ScenarioSpec& spec, const Calibration& cal, double lin) {
    switch (spec.treatment) {
        case TreatmentModel::Logistic: return expit(cal.intercept + lin);
        case TreatmentModel::Probit: return normal_cdf(cal.intercept + lin);
        case TreatmentModel::Deterministic: return lin > cal.mu ? 1.0 : 0.0;
    }
    return 0.5;
}

struct RejectionControl {
    std::uint64_t max_proposals = 10'000'000;
    double min_acceptance = 1e-6;
};

/// iid N(0, 1) rows conditioned on beta0'Z >= threshold. The support coordinates of beta0
/// are drawn first and rejected; the remaining coordinates are independent of the event.
inline Matrix draw_covariates(const ScenarioSpec& spec, Index rows, Rng& rng, const RejectionControl& control = {}) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const IndexList support = nonzero_indices(spec.beta0);
    Matrix z(rows, spec.p);
    std::uint64_t proposals = 0, accepted = 0;
    for (Index i = 0; i < rows; ++i) {
        while (true) {
            double eta = 0.0;
            for (Index j : support) {
                z(i, j) = normal(rng);
                eta += spec.beta0(j) * z(i, j);
            }
            ++proposals;
            if (eta >= spec.covariate_threshold) {
                ++accepted;
                break;
            }
            if (proposals >= control.max_proposals &&
                static_cast<double>(accepted) < control.min_acceptance * static_cast<double>(proposals)) {
                throw Error(ErrorCode::RejectionStall, "covariate rejection sampler stalled");
            }
        }
        std::size_t s = 0;
        for (Index j = 0; j < spec.p; ++j) {
            if (s < support.size() && support[s] == j) {
                ++s;
                continue;
            }
            z(i, j) = normal(rng);
        }
    }
    return z;
}

inline Vector assign_treatment(const ScenarioSpec& spec, const Calibration& cal, const Matrix& z, Rng& rng) {
    const Vector lin = z * spec.gamma0;
    Vector d(z.rows());
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (Index i = 0; i < z.rows(); ++i) {
        const double prob = treatment_probability(spec, cal, lin(i));
        if (spec.treatment == TreatmentModel::Deterministic) {
            d(i) = prob;
        } else {
            d(i) = unif(rng) < prob ? 1.0 : 0.0;
        }
    }
    return d;
}

/// Event times with the subject's constant hazard rate.
inline Vector draw_outcome(const ScenarioSpec& spec, const Matrix& z, const Vector& d, Rng& rng) {
    const Vector eta = z * spec.beta0;
    Vector t(z.rows());
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (Index i = 0; i < z.rows(); ++i) {
        const double rate = hazard_rate(spec, eta(i), d(i));
        if (!(rate > 0.0)) throw Error(ErrorCode::NonpositiveRate, "nonpositive hazard rate");
        t(i) = -std::log1p(-unif(rng)) / rate;
    }
    return t;
}

struct CalibrationControl {
    Index pilot_size = 50'000;
    double tolerance = 1e-10;
};

namespace detail {

/// Expected event probability and treated at-risk share at tau over the pilot, given c0 >= tau.
struct PilotMoments {
    double event_a = 0.0;  // mean of 1 - e^{-r tau}
    double event_b = 0.0;  // mean of (1 - e^{-r tau}) / r - tau e^{-r tau}
    double treated_survival = 0.0;  // mean of P(D=1|Z) e^{-r1 tau}
};

inline PilotMoments pilot_moments(const std::vector<double>& prob, const std::vector<double>& r0,
                                  const std::vector<double>& r1, double tau) {
    PilotMoments m;
    const double n = static_cast<double>(prob.size());
    for (std::size_t i = 0; i < prob.size(); ++i) {
        for (int d : {0, 1}) {
            const double w = d == 1 ? prob[i] : 1.0 - prob[i];
            if (w == 0.0) continue;
            const double r = d == 1 ? r1[i] : r0[i];
            const double s = std::exp(-r * tau);
            m.event_a += w * (-std::expm1(-r * tau));
            m.event_b += w * (-std::expm1(-r * tau) / r - tau * s);
            if (d == 1) m.treated_survival += w * s;
        }
    }
    m.event_a /= n;
    m.event_b /= n;
    m.treated_survival /= n;
    return m;
}

template <class F>
double bisect(F&& f, double lo, double hi, double tol, int max_iter = 200) {
    double flo = f(lo);
    for (int it = 0; it < max_iter && hi - lo > tol * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

/**
 * Pilot-sample calibration. The intercept makes the mean propensity 0.5 (median of
 * gamma0'Z for deterministic assignment); then tau and c0 are chosen so that the
 * expected censored share is `censor_target` and the expected number of treated subjects
 * at risk at tau is atrisk_fraction * n, with C = min(tau, Uniform(0, c0)). Both
 * expectations are computed exactly given the pilot covariates.
 */
inline Calibration calibrate(const ScenarioSpec& spec, std::uint64_t seed, const CalibrationControl& control = {}) {
    if (control.pilot_size < 10'000) throw Error(ErrorCode::InvalidArgument, "pilot size must be at least 10^4");
    Rng rng(seed);
    const Matrix z = draw_covariates(spec, control.pilot_size, rng);
    const Vector lin = z * spec.gamma0;
    const Vector eta = z * spec.beta0;
    Calibration cal;

    if (spec.treatment == TreatmentModel::Deterministic) {
        std::vector<double> v(lin.data(), lin.data() + lin.size());
        std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
        cal.mu = v[v.size() / 2];
    } else {
        auto mean_prob = [&](double c) {
            Calibration trial;
            trial.intercept = c;
            double s = 0.0;
            for (Index i = 0; i < lin.size(); ++i) s += treatment_probability(spec, trial, lin(i));
            return s / static_cast<double>(lin.size()) - 0.5;
        };
        if (spec.gamma0.isZero()) {
            cal.intercept = 0.0;
        } else {
            cal.intercept = detail::bisect(mean_prob, -30.0, 30.0, 1e-14);
        }
    }

    std::vector<double> prob(static_cast<std::size_t>(lin.size())), r0(prob.size()), r1(prob.size());
    for (Index i = 0; i < lin.size(); ++i) {
        const auto u = static_cast<std::size_t>(i);
        prob[u] = treatment_probability(spec, cal, lin(i));
        r0[u] = hazard_rate(spec, eta(i), 0.0);
        r1[u] = hazard_rate(spec, eta(i), 1.0);
        if (!(r0[u] > 0.0) || !(r1[u] > 0.0)) throw Error(ErrorCode::NonpositiveRate, "nonpositive hazard rate");
    }

    const double event_target = 1.0 - spec.censor_target;
    // c0 solving mean P(event) = target for fixed tau; infinite when the target is not reachable.
    auto c0_for = [&](const detail::PilotMoments& m) {
        const double excess = m.event_a - event_target;
        return excess > 0.0 ? m.event_b / excess : INFINITY;
    };
    auto atrisk_gap = [&](double tau) {
        const auto m = detail::pilot_moments(prob, r0, r1, tau);
        const double c0 = c0_for(m);
        if (!std::isfinite(c0)) return m.treated_survival - spec.atrisk_fraction;
        return m.treated_survival * std::max(0.0, 1.0 - tau / c0) - spec.atrisk_fraction;
    };

    // Smallest tau at which uncensored event probability reaches the target.
    auto event_gap = [&](double tau) { return detail::pilot_moments(prob, r0, r1, tau).event_a - event_target; };
    double hi = 1.0;
    while (event_gap(hi) <= 0.0 && hi < 1e6) hi *= 2.0;
    if (event_gap(hi) <= 0.0) throw Error(ErrorCode::CalibrationInfeasible, "censoring target unreachable");
    const double tau_min = detail::bisect(event_gap, 0.0, hi, control.tolerance);
    double lo = tau_min * (1.0 + 1e-9);
    if (atrisk_gap(lo) <= 0.0) {
        throw Error(ErrorCode::CalibrationInfeasible, "treated at-risk target unreachable with the censoring target");
    }
    double top = lo * 2.0;
    while (atrisk_gap(top) > 0.0 && top < 1e6) top *= 2.0;
    if (atrisk_gap(top) > 0.0) throw Error(ErrorCode::CalibrationInfeasible, "could not bracket tau");
    cal.tau = detail::bisect(atrisk_gap, lo, top, control.tolerance);
    const auto m = detail::pilot_moments(prob, r0, r1, cal.tau);
    cal.c0 = c0_for(m);
    cal.censoring = 1.0 - (m.event_a - m.event_b / cal.c0);
    cal.atrisk_fraction = m.treated_survival * (1.0 - cal.tau / cal.c0);
    if (!(cal.c0 >= cal.tau) || std::abs(cal.censoring - spec.censor_target) > 0.005) {
        throw Error(ErrorCode::CalibrationInfeasible, "calibration did not meet its targets");
    }
    return cal;
}

/// Simulated cohort with its known truth.
struct SimulatedData {
    SurvivalDataset data;
    NuisanceTruth truth;
};

inline SimulatedData simulate_dataset(const ScenarioSpec& spec, const Calibration& cal, Rng& rng) {
    Matrix z = draw_covariates(spec, spec.n, rng);
    Vector d = assign_treatment(spec, cal, z, rng);
    const Vector t = draw_outcome(spec, z, d, rng);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Vector x(spec.n), delta(spec.n);
    for (Index i = 0; i < spec.n; ++i) {
        const double c = std::min(cal.tau, cal.c0 * unif(rng));
        x(i) = std::min(t(i), c);
        delta(i) = t(i) <= c ? 1.0 : 0.0;
    }
    NuisanceTruth truth;
    truth.beta0 = spec.beta0;
    truth.exp_link = spec.outcome == OutcomeModel::ExponentialLink;
    const Vector lin = z * spec.gamma0;
    Vector prob(spec.n);
    for (Index i = 0; i < spec.n; ++i) prob(i) = treatment_probability(spec, cal, lin(i));
    truth.propensity = std::move(prob);
    return {SurvivalDataset(std::move(x), std::move(delta), std::move(d), std::move(z), cal.tau), std::move(truth)};
}

struct StudyConfig {
    std::vector<Method> methods{kAllMethods, kAllMethods + 5};
    int reps = 500;
    std::uint64_t seed = 1;
    int workers = 1;
    EstimatorConfig estimator;
    CalibrationControl calibration;
    bool diagnostics = true;
};

struct ReplicationRecord {
    int rep = 0;
    Method method = Method::Score;
    std::optional<TreatmentEffectReport> report;
    std::optional<ErrorCode> error;
};

struct ReplicationResult {
    std::vector<ReplicationRecord> records;
    std::optional<NuisanceDiagnostics> diagnostics;
    double censoring = 0.0;
    Index treated_at_risk = 0;
};

struct MethodSummary {
    Method method = Method::Score;
    int replications = 0;
    int divergent = 0;
    double bias = 0.0;
    double sd = 0.0;
    double mean_se = 0.0;
    double coverage = 0.0;
    double rmse = 0.0;
};

struct DiagnosticsSummary {
    int count = 0;
    double mean_deviance_beta = 0.0;
    double mean_deviance_gamma = 0.0;
    double median_magnitude_beta = 0.0;
    double median_magnitude_gamma = 0.0;
    int divergent_magnitude_gamma = 0;
};

struct SimulationSummary {
    ScenarioSpec spec;
    Calibration calibration;
    int reps = 0;
    std::uint64_t seed = 0;
    std::vector<MethodSummary> methods;
    DiagnosticsSummary diagnostics;
    double mean_censoring = 0.0;
    double mean_treated_at_risk = 0.0;
    std::vector<ReplicationResult> replications;

    const MethodSummary& row(Method m) const {
        for (const auto& r : methods) {
            if (r.method == m) return r;
        }
        throw Error(ErrorCode::InvalidArgument, "method not in the study");
    }
};

inline ReplicationResult run_replication(const ScenarioSpec& spec, const Calibration& cal, const StudyConfig& config,
                                         int rep) {
    Rng rng = make_rng(config.seed, static_cast<std::uint64_t>(rep), 1);
    const SimulatedData sim = simulate_dataset(spec, cal, rng);
    ReplicationResult out;
    out.censoring = 1.0 - sim.data.events().mean();
    for (Index i = 0; i < sim.data.n(); ++i) {
        if (sim.data.treated(i) && sim.data.time(i) >= sim.data.tau()) ++out.treated_at_risk;
    }
    EstimatorConfig est = config.estimator;
    est.workers = 1;
    EstimationSession session(sim.data, est, stream_seed(config.seed, static_cast<std::uint64_t>(rep), 2));
    for (Method m : config.methods) {
        MethodOutcome o = session.try_run(m);
        out.records.push_back({rep, m, std::move(o.report), o.error});
    }
    if (config.diagnostics) {
        try {
            const auto& folds = session.fold_nuisances(est.hdi_cf_beta);
            NuisanceDiagnostics d = empirical_magnitudes(sim.data, folds);
            const NuisanceDiagnostics dev = empirical_deviances(sim.data, folds, sim.truth);
            d.deviance_beta = dev.deviance_beta;
            d.deviance_gamma = dev.deviance_gamma;
            out.diagnostics = d;
        } catch (const Error&) {
        }
    }
    return out;
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

/// Moments of the `slot`-th method over the given replications; failed runs count as divergent.
inline MethodSummary summarize_method(const ScenarioSpec& spec, std::span<const ReplicationResult> replications,
                                      std::size_t slot, Method method) {
    MethodSummary row;
    row.method = method;
    std::vector<double> theta;
    double se = 0.0;
    int covered = 0;
    for (const auto& rep : replications) {
        const auto& rec = rep.records[slot];
        if (!rec.report) {
            ++row.divergent;
            continue;
        }
        theta.push_back(rec.report->theta);
        se += rec.report->se;
        if (rec.report->covers(spec.theta0)) ++covered;
    }
    row.replications = static_cast<int>(theta.size());
    if (theta.empty()) return row;
    const double r = static_cast<double>(theta.size());
    double mean = 0.0, sq = 0.0;
    for (double t : theta) mean += t;
    mean /= r;
    for (double t : theta) {
        sq += (t - mean) * (t - mean);
        row.rmse += (t - spec.theta0) * (t - spec.theta0);
    }
    row.bias = mean - spec.theta0;
    row.sd = theta.size() > 1 ? std::sqrt(sq / (r - 1.0)) : 0.0;
    row.mean_se = se / r;
    row.coverage = static_cast<double>(covered) / r;
    row.rmse = std::sqrt(row.rmse / r);
    return row;
}

/**
 * Monte-Carlo study. Replication r draws from its own stream keyed by (seed, r), so the
 * summary does not depend on the number of workers. Replications where a method fails
 * are counted as divergent for that method and left out of its moments.
 */
inline SimulationSummary run_study(const ScenarioSpec& spec, const StudyConfig& config) {
    if (config.reps < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 replications");
    SimulationSummary summary;
    summary.spec = spec;
    summary.reps = config.reps;
    summary.seed = config.seed;
    summary.calibration = calibrate(spec, stream_seed(config.seed, 0xCA11B, 0), config.calibration);
    summary.replications.resize(static_cast<std::size_t>(config.reps));
    parallel_for(summary.replications.size(), config.workers, [&](std::size_t r) {
        summary.replications[r] = run_replication(spec, summary.calibration, config, static_cast<int>(r));
    });

    for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
        summary.methods.push_back(summarize_method(spec, summary.replications, mi, config.methods[mi]));
    }

    std::vector<double> mb, mg;
    for (const auto& rep : summary.replications) {
        summary.mean_censoring += rep.censoring;
        summary.mean_treated_at_risk += static_cast<double>(rep.treated_at_risk);
        if (!rep.diagnostics) continue;
        auto& d = summary.diagnostics;
        ++d.count;
        d.mean_deviance_beta += rep.diagnostics->deviance_beta.value_or(0.0);
        d.mean_deviance_gamma += rep.diagnostics->deviance_gamma.value_or(0.0);
        mb.push_back(rep.diagnostics->magnitude_beta);
        mg.push_back(rep.diagnostics->magnitude_gamma);
        if (rep.diagnostics->magnitude_gamma_divergent) ++d.divergent_magnitude_gamma;
    }
    summary.mean_censoring /= config.reps;
    summary.mean_treated_at_risk /= config.reps;
    if (summary.diagnostics.count > 0) {
        summary.diagnostics.mean_deviance_beta /= summary.diagnostics.count;
        summary.diagnostics.mean_deviance_gamma /= summary.diagnostics.count;
        summary.diagnostics.median_magnitude_beta = median(mb);
        summary.diagnostics.median_magnitude_gamma = median(mg);
    }
    return summary;
}

inline nlohmann::ordered_json to_json(const SimulationSummary& s) {
    nlohmann::ordered_json j;
    j["scenario"] = s.spec.name;
    j["s_beta"] = s.spec.s_beta;
    j["s_gamma"] = s.spec.s_gamma;
    j["n"] = s.spec.n;
    j["p"] = s.spec.p;
    j["theta0"] = s.spec.theta0;
    j["reps"] = s.reps;
    j["seed"] = s.seed;
    nlohmann::ordered_json cal;
    cal["tau"] = s.calibration.tau;
    cal["c0"] = s.calibration.c0;
    cal["intercept"] = s.calibration.intercept;
    cal["mu"] = s.calibration.mu;
    cal["expected_censoring"] = s.calibration.censoring;
    cal["expected_treated_at_risk_fraction"] = s.calibration.atrisk_fraction;
    j["calibration"] = cal;
    j["mean_censoring"] = s.mean_censoring;
    j["mean_treated_at_risk"] = s.mean_treated_at_risk;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& m : s.methods) {
        nlohmann::ordered_json r;
        r["method"] = std::string(to_string(m.method));
        r["replications"] = m.replications;
        r["divergent"] = m.divergent;
        r["bias"] = m.bias;
        r["sd"] = m.sd;
        r["mean_se"] = m.mean_se;
        r["cp"] = m.coverage;
        r["rmse"] = m.rmse;
        rows.push_back(std::move(r));
    }
    j["methods"] = std::move(rows);
    nlohmann::ordered_json d;
    d["replications"] = s.diagnostics.count;
    d["mean_deviance_beta"] = s.diagnostics.mean_deviance_beta;
    d["mean_deviance_gamma"] = s.diagnostics.mean_deviance_gamma;
    d["median_magnitude_beta"] = s.diagnostics.median_magnitude_beta;
    d["median_magnitude_gamma"] = s.diagnostics.median_magnitude_gamma;
    d["divergent_magnitude_gamma"] = s.diagnostics.divergent_magnitude_gamma;
    j["diagnostics"] = std::move(d);
    return j;
}

/// One line per (replication, method).
inline void write_replications_csv(std::ostream& os, const SimulationSummary& s) {
    os << "rep,method,theta,se,ci_low,ci_high,covers,error\n";
    char buf[160];
    for (const auto& rep : s.replications) {
        for (const auto& rec : rep.records) {
            os << rec.rep << ',' << to_string(rec.method) << ',';
            if (rec.report) {
                const auto& r = *rec.report;
                std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%d,", r.theta, r.se, r.ci_low, r.ci_high,
                              r.covers(s.spec.theta0) ? 1 : 0);
                os << buf << '\n';
            } else {
                os << ",,,,," << (rec.error ? to_string(*rec.error) : std::string_view("unknown")) << '\n';
            }
        }
    }
}

}  // namespace hazdiff
