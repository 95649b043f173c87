// hazdiff: treatment effects on censored outcomes under the additive hazards model.
//
//   hazdiff fit --input d.csv --method hdi-cf --folds 10 --seed 7 --out r.json
//   hazdiff simulate --scenario sparse --sb 2 --sg 1 --n 300 --p 300 --reps 50 --seed 1
//   hazdiff diagnose --input d.csv --truth beta0.txt
//
// Exit codes: 0 success, 2 data or usage error, 3 estimator error.

#include "hazdiff/hazdiff.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitData = 2;
constexpr int kExitEstimator = 3;

using hazdiff::Error;
using hazdiff::ErrorCode;
using json = nlohmann::ordered_json;

int exit_code_for(ErrorCode code) { return hazdiff::is_data_error(code) ? kExitData : kExitEstimator; }

/// key=value lines become `--key value` arguments placed before the user's own, so
/// flags given on the command line win.
std::vector<std::string> config_arguments(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open config file " + path);
    std::vector<std::string> args;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = hazdiff::detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::InvalidArgument, "config line without '=': " + line);
        const std::string key = hazdiff::detail::trim(line.substr(0, eq));
        const std::string value = hazdiff::detail::trim(line.substr(eq + 1));
        if (value == "true") {
            args.push_back("--" + key);
        } else if (value != "false") {
            args.push_back("--" + key);
            args.push_back(value);
        }
    }
    return args;
}

/// Moves `--config FILE` out of argv and splices the file's options in after the subcommand.
std::vector<std::string> expand_config(int argc, char** argv) {
    std::vector<std::string> raw(argv, argv + argc);
    std::optional<std::string> config;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] == "--config" && i + 1 < raw.size()) {
            config = raw[++i];
        } else if (raw[i].rfind("--config=", 0) == 0) {
            config = raw[i].substr(9);
        } else {
            rest.push_back(raw[i]);
        }
    }
    if (!config || rest.size() < 2) return rest;
    std::vector<std::string> out(rest.begin(), rest.begin() + 2);
    for (auto& a : config_arguments(*config)) out.push_back(std::move(a));
    out.insert(out.end(), rest.begin() + 2, rest.end());
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    out << text;
}

std::vector<hazdiff::Method> parse_methods(const std::vector<std::string>& names) {
    std::vector<hazdiff::Method> out;
    for (const auto& entry : names) {
        std::stringstream ss(entry);
        std::string name;
        while (std::getline(ss, name, ',')) {
            if (name == "all") {
                out.assign(std::begin(hazdiff::kAllMethods), std::end(hazdiff::kAllMethods));
                return out;
            }
            const auto m = hazdiff::parse_method(name);
            if (!m) throw Error(ErrorCode::InvalidArgument, "unknown method '" + name + "'");
            out.push_back(*m);
        }
    }
    return out;
}

hazdiff::Vector read_vector(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    std::vector<double> values;
    std::string token;
    std::size_t row = 0;
    while (in >> token) {
        std::stringstream ss(token);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            if (!cell.empty()) values.push_back(hazdiff::detail::parse_number(cell, ++row, "truth"));
        }
    }
    return Eigen::Map<hazdiff::Vector>(values.data(), static_cast<hazdiff::Index>(values.size()));
}

struct CommonOptions {
    std::uint64_t seed = 1;
    int k = 10;
    int cv_folds = 10;
    int n_lambdas = 100;
    double lambda_min_ratio = 0.05;
    int cv_patience = 10;
    bool no_standardize = false;
    int workers = hazdiff::default_workers();
    std::string hdi_cf_beta = "covariates";

    void add(CLI::App* app) {
        app->add_option("--seed", seed, "Master random seed")->envname("HAZDIFF_SEED");
        app->add_option("--folds,-k", k, "Cross-fitting folds")->check(CLI::Range(2, 1 << 30));
        app->add_option("--cv-folds", cv_folds, "Penalty-selection folds for one-shot fits")
            ->check(CLI::Range(2, 1 << 30));
        app->add_option("--n-lambdas", n_lambdas, "Penalty grid size")->check(CLI::Range(2, 100000));
        app->add_option("--lambda-min-ratio", lambda_min_ratio, "Smallest penalty as a share of lambda_max")
            ->check(CLI::Range(1e-12, 1.0));
        app->add_option("--cv-patience", cv_patience,
                        "Stop penalty selection after this many grid points without improvement (0: full grid)")
            ->check(CLI::Range(0, 1 << 30));
        app->add_flag("--no-standardize", no_standardize, "Penalize coefficients on the raw covariate scale");
        app->add_option("--workers", workers, "Worker threads")->check(CLI::Range(1, 4096));
        app->add_option("--hdi-cf-beta", hdi_cf_beta, "Outcome fit used by hdi_cf")
            ->check(CLI::IsMember({"covariates", "cofit"}));
    }

    hazdiff::EstimatorConfig estimator() const {
        hazdiff::EstimatorConfig c;
        c.k = k;
        c.nuisance.cv_folds = cv_folds;
        c.nuisance.n_lambdas = n_lambdas;
        c.nuisance.lambda_min_ratio = lambda_min_ratio;
        c.nuisance.cv_patience = cv_patience;
        c.nuisance.standardize = !no_standardize;
        c.hdi_cf_beta = hdi_cf_beta == "cofit" ? hazdiff::BetaMode::CoFit : hazdiff::BetaMode::CovariateOnly;
        c.workers = workers;
        return c;
    }
};

struct FitOptions {
    std::string input;
    std::optional<double> tau;
    std::vector<std::string> methods{"hdi_cf"};
    std::string out;
    std::string baseline_out;
    bool fixed_baseline = false;
    CommonOptions common;
};

int cmd_fit(const FitOptions& o) {
    const hazdiff::SurvivalDataset data = hazdiff::load_csv(o.input, o.tau);
    const auto methods = parse_methods(o.methods);
    hazdiff::EstimatorConfig config = o.common.estimator();
    config.fixed_baseline = o.fixed_baseline;
    hazdiff::EstimationSession session(data, config, o.common.seed);

    json reports = json::array();
    int status = kExitOk;
    for (auto m : methods) {
        const hazdiff::MethodOutcome outcome = session.try_run(m);
        if (outcome.ok()) {
            reports.push_back(hazdiff::to_json(*outcome.report));
        } else {
            std::cerr << "hazdiff: " << hazdiff::to_string(m) << " failed: " << outcome.message << '\n';
            status = std::max(status, exit_code_for(*outcome.error));
        }
    }
    const json& doc = methods.size() == 1 && reports.size() == 1 ? reports[0] : reports;
    write_text(o.out, doc.dump(2) + "\n");

    if (!o.baseline_out.empty()) {
        const hazdiff::RiskSetIndex index(data);
        const auto& nuisance = session.nuisances(config.score_beta);
        std::ostringstream csv;
        hazdiff::write_baseline_csv(csv, hazdiff::breslow(data, index, nuisance.beta), nuisance.theta_l.value_or(0.0));
        write_text(o.baseline_out, csv.str());
    }
    return status;
}

struct SimulateOptions {
    std::string scenario = "sparse";
    std::optional<int> s_beta;
    std::optional<int> s_gamma;
    hazdiff::Index n = 300;
    hazdiff::Index p = 300;
    int reps = 500;
    double theta0 = -0.25;
    std::vector<std::string> methods{"all"};
    hazdiff::Index pilot = 50'000;
    bool no_diagnostics = false;
    std::string out;
    std::string reps_out;
    CommonOptions common;
};

int cmd_simulate(const SimulateOptions& o) {
    const int default_sb = o.scenario == "dense" ? 30 : 2;
    hazdiff::ScenarioSpec spec =
        hazdiff::make_scenario(o.scenario, o.s_beta.value_or(default_sb), o.s_gamma.value_or(1), o.n, o.p);
    spec.theta0 = o.theta0;
    hazdiff::StudyConfig config;
    config.methods = parse_methods(o.methods);
    config.reps = o.reps;
    config.seed = o.common.seed;
    config.workers = o.common.workers;
    config.estimator = o.common.estimator();
    config.calibration.pilot_size = o.pilot;
    config.diagnostics = !o.no_diagnostics;
    const hazdiff::SimulationSummary summary = hazdiff::run_study(spec, config);
    write_text(o.out, hazdiff::to_json(summary).dump(2) + "\n");
    if (!o.reps_out.empty()) {
        std::ostringstream csv;
        hazdiff::write_replications_csv(csv, summary);
        write_text(o.reps_out, csv.str());
    }
    return kExitOk;
}

struct DiagnoseOptions {
    std::string input;
    std::optional<double> tau;
    std::string truth;
    bool exp_link = false;
    std::string out;
    std::string balance_out;
    CommonOptions common;
};

int cmd_diagnose(const DiagnoseOptions& o) {
    const hazdiff::SurvivalDataset data = hazdiff::load_csv(o.input, o.tau);
    const hazdiff::EstimatorConfig config = o.common.estimator();
    hazdiff::EstimationSession session(data, config, o.common.seed);

    json doc;
    doc["n"] = data.n();
    doc["p"] = data.p();
    const auto& one_shot = session.nuisances(hazdiff::BetaMode::CovariateOnly);
    const hazdiff::Vector ps = hazdiff::propensities(data.covariates(), one_shot.gamma);
    doc["lambda_gamma"] = one_shot.lambda_gamma;
    doc["s_hat_gamma"] = one_shot.s_hat_gamma();
    doc["propensity"] = hazdiff::to_json(hazdiff::propensity_summary(data.treatments(), ps));

    const hazdiff::BalanceTable balance = hazdiff::balance_report(data, one_shot.gamma);
    doc["balance_sup_gap"] = balance.sup_gap;
    doc["balance_probes"] = balance.rows.size();

    const auto& folds = session.fold_nuisances(config.hdi_cf_beta);
    hazdiff::NuisanceDiagnostics diag = hazdiff::empirical_magnitudes(data, folds);
    if (!o.truth.empty()) {
        hazdiff::NuisanceTruth truth;
        truth.beta0 = read_vector(o.truth);
        truth.exp_link = o.exp_link;
        const auto dev = hazdiff::empirical_deviances(data, folds, truth);
        diag.deviance_beta = dev.deviance_beta;
    }
    doc["k"] = folds.size();
    doc["nuisance"] = hazdiff::to_json(diag);
    write_text(o.out, doc.dump(2) + "\n");

    if (!o.balance_out.empty()) {
        std::ostringstream csv;
        hazdiff::write_balance_csv(csv, balance);
        write_text(o.balance_out, csv.str());
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Treatment effects on censored outcomes under the additive hazards model"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.add_option("--config", "key=value file; command-line flags take precedence");

    FitOptions fit;
    auto* fit_cmd = app.add_subcommand("fit", "Estimate the treatment effect from a CSV cohort");
    fit_cmd->add_option("--input,-i", fit.input, "CSV with header time,status,treatment,z1..zp")->required();
    fit_cmd->add_option("--tau", fit.tau, "Study horizon (default: largest time)")->check(CLI::PositiveNumber);
    fit_cmd->add_option("--method,-m", fit.methods, "naive_lasso, score, hdi, score_cf, hdi_cf or all")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    fit_cmd->add_option("--out,-o", fit.out, "Report path (default stdout)");
    fit_cmd->add_option("--baseline-out", fit.baseline_out, "CSV dump of the Breslow baseline");
    fit_cmd->add_flag("--fixed-baseline", fit.fixed_baseline, "Plug the theta_l-fixed Breslow into the score");
    fit.common.add(fit_cmd);

    SimulateOptions sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Monte-Carlo study of the estimators");
    sim_cmd->add_option("--scenario", sim.scenario, "sparse, dense, E, P or D");
    sim_cmd->add_option("--sb", sim.s_beta, "Outcome sparsity (2, 6, 15, 30)");
    sim_cmd->add_option("--sg", sim.s_gamma, "Treatment sparsity (1, 3, 10, 20)");
    sim_cmd->add_option("--n", sim.n, "Subjects per replication")->check(CLI::Range(10, 100000000));
    sim_cmd->add_option("--p", sim.p, "Covariates")->check(CLI::Range(1, 1000000));
    sim_cmd->add_option("--reps", sim.reps, "Replications")->check(CLI::Range(2, 100000000));
    sim_cmd->add_option("--theta0", sim.theta0, "True hazard difference");
    sim_cmd->add_option("--method,-m", sim.methods, "Methods to run (default all)")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    sim_cmd->add_option("--pilot", sim.pilot, "Calibration pilot size")->check(CLI::Range(10000, 100000000));
    sim_cmd->add_flag("--no-diagnostics", sim.no_diagnostics, "Skip deviance and magnitude diagnostics");
    sim_cmd->add_option("--out,-o", sim.out, "Summary JSON path (default stdout)");
    sim_cmd->add_option("--reps-out", sim.reps_out, "Per-replication CSV path");
    sim.common.add(sim_cmd);

    DiagnoseOptions diag;
    auto* diag_cmd = app.add_subcommand("diagnose", "Overlap, balance and nuisance diagnostics");
    diag_cmd->add_option("--input,-i", diag.input, "CSV with header time,status,treatment,z1..zp")->required();
    diag_cmd->add_option("--tau", diag.tau, "Study horizon (default: largest time)")->check(CLI::PositiveNumber);
    diag_cmd->add_option("--truth", diag.truth, "File with the true beta0 (simulation mode)");
    diag_cmd->add_flag("--exp-link", diag.exp_link, "Truth enters the hazard as exp(beta0'Z)");
    diag_cmd->add_option("--out,-o", diag.out, "Diagnostics JSON path (default stdout)");
    diag_cmd->add_option("--balance-out", diag.balance_out, "Balance table CSV path");
    diag.common.add(diag_cmd);

    try {
        std::vector<std::string> args = expand_config(argc, argv);
        std::vector<char*> cargs;
        for (auto& a : args) cargs.push_back(a.data());
        try {
            app.parse(static_cast<int>(cargs.size()), cargs.data());
        } catch (const CLI::ParseError& e) {
            const int rc = app.exit(e);
            return rc == 0 ? kExitOk : kExitData;
        }
        if (fit_cmd->parsed()) return cmd_fit(fit);
        if (sim_cmd->parsed()) return cmd_simulate(sim);
        return cmd_diagnose(diag);
    } catch (const Error& e) {
        std::cerr << "hazdiff: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "hazdiff: " << e.what() << '\n';
        return kExitEstimator;
    }
}
