#pragma once

#include "hazdiff/common.hpp"
#include "hazdiff/error.hpp"

#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>

namespace hazdiff {

/**
 * Right-censored observational cohort: follow-up times X_i = min(T_i, C_i),
 * event flags, binary treatment and an n x p covariate matrix, observed on [0, tau].
 *
 * Instances are validated on construction and never mutated afterwards. Times
 * beyond tau are administratively censored at tau. Times carry whatever unit the
 * caller uses; treatment effects come back in 1/time of that unit.
 */
class SurvivalDataset {
public:
    SurvivalDataset(Vector times, Vector events, Vector treatments, Matrix covariates,
                    std::optional<double> tau = std::nullopt)
        : times_(std::move(times)),
          events_(std::move(events)),
          treatments_(std::move(treatments)),
          covariates_(std::move(covariates)) {
        validate(tau, 2);
    }

    Index n() const noexcept { return times_.size(); }
    Index p() const noexcept { return covariates_.cols(); }
    double tau() const noexcept { return tau_; }

    const Vector& times() const noexcept { return times_; }
    const Vector& events() const noexcept { return events_; }
    const Vector& treatments() const noexcept { return treatments_; }
    const Matrix& covariates() const noexcept { return covariates_; }

    double time(Index i) const { return times_(i); }
    bool event(Index i) const { return events_(i) != 0.0; }
    bool treated(Index i) const { return treatments_(i) != 0.0; }

    Index treated_count() const { return static_cast<Index>(treatments_.sum()); }

    /// Rows `rows` (in the given order) with the same tau.
    SurvivalDataset subset(std::span<const Index> rows) const {
        const Index m = static_cast<Index>(rows.size());
        Vector t(m), e(m), d(m);
        Matrix z(m, p());
        for (Index r = 0; r < m; ++r) {
            const Index i = rows[static_cast<std::size_t>(r)];
            t(r) = times_(i);
            e(r) = events_(i);
            d(r) = treatments_(i);
            z.row(r) = covariates_.row(i);
        }
        SurvivalDataset out(Unvalidated{}, std::move(t), std::move(e), std::move(d), std::move(z));
        out.validate(tau_, 1);
        return out;
    }

    /// Same subjects with the treatment column appended in front of Z.
    Matrix design_with_treatment() const {
        Matrix v(n(), p() + 1);
        v.col(0) = treatments_;
        v.rightCols(p()) = covariates_;
        return v;
    }

private:
    struct Unvalidated {};

    SurvivalDataset(Unvalidated, Vector times, Vector events, Vector treatments, Matrix covariates)
        : times_(std::move(times)),
          events_(std::move(events)),
          treatments_(std::move(treatments)),
          covariates_(std::move(covariates)) {}

    // Fold subsets may hold a single subject (leave-one-out); user data needs two.
    void validate(std::optional<double> tau, Index min_rows) {
        const Index n = times_.size();
        if (n == 0) throw Error(ErrorCode::EmptyDataset, "dataset has no rows");
        if (n < min_rows) throw Error(ErrorCode::InvalidArgument, "dataset needs at least 2 rows");
        if (events_.size() != n || treatments_.size() != n || covariates_.rows() != n) {
            throw Error(ErrorCode::InvalidArgument, "column lengths differ");
        }
        if (covariates_.cols() < 1) throw Error(ErrorCode::InvalidArgument, "need at least one covariate");
        if (!covariates_.allFinite() || !times_.allFinite()) {
            throw Error(ErrorCode::NonFiniteValue, "non-finite time or covariate");
        }
        for (Index i = 0; i < n; ++i) {
            if (times_(i) < 0.0) throw Error(ErrorCode::InvalidArgument, "negative follow-up time");
            if (events_(i) != 0.0 && events_(i) != 1.0) {
                throw Error(ErrorCode::NonBinaryColumn, "status must be 0 or 1");
            }
            if (treatments_(i) != 0.0 && treatments_(i) != 1.0) {
                throw Error(ErrorCode::NonBinaryColumn, "treatment must be 0 or 1");
            }
        }
        tau_ = tau ? *tau : times_.maxCoeff();
        if (!std::isfinite(tau_) || tau_ <= 0.0) throw Error(ErrorCode::InvalidArgument, "tau must be positive");
        for (Index i = 0; i < n; ++i) {
            if (times_(i) > tau_) {
                times_(i) = tau_;
                events_(i) = 0.0;
            }
        }
    }

    Vector times_;
    Vector events_;
    Vector treatments_;
    Matrix covariates_;
    double tau_ = 0.0;
};

namespace detail {

inline std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_number(const std::string& cell, std::size_t row, const std::string& column) {
    const std::string where = "row " + std::to_string(row) + ", column '" + column + "'";
    if (cell.empty()) throw Error(ErrorCode::NonFiniteValue, "missing value at " + where);
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end != cell.c_str() + cell.size() || errno == ERANGE) {
        throw Error(ErrorCode::NonFiniteValue, "unparseable value '" + cell + "' at " + where);
    }
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "non-finite value at " + where);
    return v;
}

}  // namespace detail

/// Reads `time,status,treatment,z1,...,zp` (exact header, '.' decimals).
inline SurvivalDataset read_csv(std::istream& in, std::optional<double> tau = std::nullopt) {
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::EmptyDataset, "empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
    const auto header = detail::split_csv_line(line);
    const std::vector<std::string> fixed = {"time", "status", "treatment"};
    for (std::size_t c = 0; c < fixed.size(); ++c) {
        if (header.size() <= c || header[c] != fixed[c]) {
            throw Error(ErrorCode::MalformedHeader, "expected column '" + fixed[c] + "' at position " +
                                                        std::to_string(c + 1));
        }
    }
    if (header.size() < 4) throw Error(ErrorCode::MalformedHeader, "expected column 'z1' at position 4");
    const std::size_t p = header.size() - 3;
    for (std::size_t j = 0; j < p; ++j) {
        const std::string want = "z" + std::to_string(j + 1);
        if (header[3 + j] != want) {
            throw Error(ErrorCode::MalformedHeader,
                        "expected column '" + want + "' at position " + std::to_string(j + 4));
        }
    }

    std::vector<double> t, e, d, z;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty()) continue;
        ++row;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size()) {
            throw Error(ErrorCode::MalformedHeader, "row " + std::to_string(row) + " has " +
                                                        std::to_string(cells.size()) + " fields, expected " +
                                                        std::to_string(header.size()));
        }
        t.push_back(detail::parse_number(cells[0], row, header[0]));
        const double s = detail::parse_number(cells[1], row, header[1]);
        const double a = detail::parse_number(cells[2], row, header[2]);
        if (s != 0.0 && s != 1.0) {
            throw Error(ErrorCode::NonBinaryColumn, "column 'status' row " + std::to_string(row));
        }
        if (a != 0.0 && a != 1.0) {
            throw Error(ErrorCode::NonBinaryColumn, "column 'treatment' row " + std::to_string(row));
        }
        e.push_back(s);
        d.push_back(a);
        for (std::size_t j = 0; j < p; ++j) z.push_back(detail::parse_number(cells[3 + j], row, header[3 + j]));
    }
    if (t.empty()) throw Error(ErrorCode::EmptyDataset, "no data rows");

    const Index n = static_cast<Index>(t.size());
    Matrix zm(n, static_cast<Index>(p));
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < static_cast<Index>(p); ++j) zm(i, j) = z[static_cast<std::size_t>(i) * p + j];
    }
    return SurvivalDataset(Eigen::Map<Vector>(t.data(), n), Eigen::Map<Vector>(e.data(), n),
                           Eigen::Map<Vector>(d.data(), n), std::move(zm), tau);
}

inline SurvivalDataset load_csv(const std::string& path, std::optional<double> tau = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
    return read_csv(in, tau);
}

/**
 * Sorted view of a dataset's follow-up times.
 *
 * Distinct observed times t_0 < ... < t_{K-1} partition [0, max X] into segments
 * (t_{k-1}, t_k] on which the at-risk set {i : X_i >= t_k} is constant. Subjects are
 * ordered by time, so that at-risk set is the suffix order[start(k) .. n). At a tied
 * time all events jump with the full set at risk; censored subjects leave afterwards.
 */
class RiskSetIndex {
public:
    explicit RiskSetIndex(const SurvivalDataset& data) : n_(data.n()) {
        const Vector& x = data.times();
        order_.resize(static_cast<std::size_t>(n_));
        std::iota(order_.begin(), order_.end(), Index{0});
        std::stable_sort(order_.begin(), order_.end(), [&](Index a, Index b) {
            if (x(a) != x(b)) return x(a) < x(b);
            return data.event(a) && !data.event(b);
        });
        slot_.assign(static_cast<std::size_t>(n_), 0);
        for (Index pos = 0; pos < n_; ++pos) {
            const Index i = order_[static_cast<std::size_t>(pos)];
            if (times_.empty() || x(i) != times_.back()) {
                times_.push_back(x(i));
                start_.push_back(pos);
                events_.push_back(0);
            }
            slot_[static_cast<std::size_t>(i)] = static_cast<Index>(times_.size()) - 1;
            if (data.event(i)) ++events_.back();
        }
    }

    Index n() const noexcept { return n_; }
    Index slots() const noexcept { return static_cast<Index>(times_.size()); }

    const IndexList& order() const noexcept { return order_; }
    /// Distinct observed times, ascending.
    const std::vector<double>& times() const noexcept { return times_; }
    double time(Index k) const { return times_[static_cast<std::size_t>(k)]; }
    /// Length of the segment (t_{k-1}, t_k], with t_{-1} = 0.
    double segment_length(Index k) const { return k == 0 ? time(0) : time(k) - time(k - 1); }
    Index start(Index k) const { return start_[static_cast<std::size_t>(k)]; }
    Index at_risk(Index k) const { return n_ - start(k); }
    Index event_count(Index k) const { return events_[static_cast<std::size_t>(k)]; }
    /// Slot k with t_k equal to subject i's time.
    Index slot_of(Index i) const { return slot_[static_cast<std::size_t>(i)]; }

    std::vector<double> event_times() const {
        std::vector<double> out;
        for (Index k = 0; k < slots(); ++k) {
            if (event_count(k) > 0) out.push_back(time(k));
        }
        return out;
    }

    /// Number at risk at each event time.
    std::vector<Index> at_risk_counts() const {
        std::vector<Index> out;
        for (Index k = 0; k < slots(); ++k) {
            if (event_count(k) > 0) out.push_back(at_risk(k));
        }
        return out;
    }

    /// Sum_i Y_i(t) for arbitrary t.
    Index at_risk_at(double t) const {
        const auto it = std::lower_bound(times_.begin(), times_.end(), t);
        if (it == times_.end()) return 0;
        return at_risk(static_cast<Index>(it - times_.begin()));
    }

    /// Per slot k: sum over subjects with X_i >= t_k of v_i.
    Vector at_risk_sum(const Vector& v) const {
        Vector suffix(n_ + 1);
        suffix(n_) = 0.0;
        for (Index pos = n_ - 1; pos >= 0; --pos) suffix(pos) = suffix(pos + 1) + v(order_[static_cast<std::size_t>(pos)]);
        Vector out(slots());
        for (Index k = 0; k < slots(); ++k) out(k) = suffix(start(k));
        return out;
    }

    /// Row k: sum over subjects with X_i >= t_k of row V_i.
    Matrix at_risk_sum(const Matrix& v) const {
        Matrix out(slots(), v.cols());
        Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(v.cols());
        Index k = slots() - 1;
        for (Index pos = n_ - 1; pos >= 0; --pos) {
            acc += v.row(order_[static_cast<std::size_t>(pos)]);
            while (k >= 0 && start(k) == pos) {
                out.row(k) = acc;
                --k;
            }
        }
        return out;
    }

    /// Per slot k: sum over subjects with X_i == t_k and an event of v_i.
    Vector event_sum(const SurvivalDataset& data, const Vector& v) const {
        Vector out = Vector::Zero(slots());
        for (Index i = 0; i < n_; ++i) {
            if (data.event(i)) out(slot_of(i)) += v(i);
        }
        return out;
    }

private:
    Index n_;
    IndexList order_;
    std::vector<double> times_;
    IndexList start_;
    IndexList events_;
    IndexList slot_;
};

inline RiskSetIndex build_risk_index(const SurvivalDataset& data) { return RiskSetIndex(data); }

/**
 * Right-continuous, piecewise-constant function on [0, tau]: zero before the first
 * knot, values(k) on [knots(k), knots(k+1)).
 */
class StepFunction {
public:
    StepFunction() = default;

    StepFunction(std::vector<double> knots, std::vector<double> values)
        : knots_(std::move(knots)), values_(std::move(values)) {
        if (knots_.size() != values_.size()) throw Error(ErrorCode::InvalidArgument, "knots/values size mismatch");
        for (std::size_t k = 1; k < knots_.size(); ++k) {
            if (!(knots_[k] > knots_[k - 1])) throw Error(ErrorCode::InvalidArgument, "knots must increase strictly");
        }
    }

    static StepFunction from_increments(std::vector<double> knots, const std::vector<double>& increments) {
        std::vector<double> values(increments.size());
        std::partial_sum(increments.begin(), increments.end(), values.begin());
        return StepFunction(std::move(knots), std::move(values));
    }

    const std::vector<double>& knots() const noexcept { return knots_; }
    const std::vector<double>& values() const noexcept { return values_; }

    double operator()(double t) const {
        const auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
        if (it == knots_.begin()) return 0.0;
        return values_[static_cast<std::size_t>(it - knots_.begin()) - 1];
    }

    double increment(std::size_t k) const { return k == 0 ? values_[0] : values_[k] - values_[k - 1]; }

    double total_variation() const {
        double tv = 0.0;
        for (std::size_t k = 0; k < values_.size(); ++k) tv += std::abs(increment(k));
        return tv;
    }

    /// Riemann-Stieltjes integral of f over (0, upto] against this function.
    template <class F>
    double integrate(F&& f, double upto = std::numeric_limits<double>::infinity()) const {
        double s = 0.0;
        for (std::size_t k = 0; k < knots_.size() && knots_[k] <= upto; ++k) s += f(knots_[k]) * increment(k);
        return s;
    }

private:
    std::vector<double> knots_;
    std::vector<double> values_;
};

/// Nelson-Aalen cumulative hazard: jumps d_k / R_k at the event times.
inline StepFunction nelson_aalen(const RiskSetIndex& index) {
    std::vector<double> knots, inc;
    for (Index k = 0; k < index.slots(); ++k) {
        if (index.event_count(k) == 0) continue;
        knots.push_back(index.time(k));
        inc.push_back(static_cast<double>(index.event_count(k)) / static_cast<double>(index.at_risk(k)));
    }
    return StepFunction::from_increments(std::move(knots), inc);
}

/// Aggregate counting process N(t) = sum_i N_i(t).
inline StepFunction counting_process(const RiskSetIndex& index) {
    std::vector<double> knots, inc;
    for (Index k = 0; k < index.slots(); ++k) {
        if (index.event_count(k) == 0) continue;
        knots.push_back(index.time(k));
        inc.push_back(static_cast<double>(index.event_count(k)));
    }
    return StepFunction::from_increments(std::move(knots), inc);
}

}  // namespace hazdiff
