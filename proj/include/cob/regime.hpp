#pragma once

// Gaussian Markov regime-switching variance model: common mean, regime-specific
// standard deviations. Forward (Hamilton) filter, backward (Kim) smoother,
// pairwise transition posteriors and simulation.

#include "cob/date.hpp"
#include "cob/error.hpp"
#include "cob/ingest.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace cob {

/// Transition matrix (row i = P(next = j | current = i)), per-regime emission
/// standard deviations in percent, and the common emission mean.
struct RegimeParams {
    Eigen::MatrixXd transition;
    Eigen::VectorXd sigma;
    double mu = 0.0;

    std::size_t k() const noexcept { return static_cast<std::size_t>(sigma.size()); }
};

struct InferenceResult {
    Eigen::MatrixXd filtered;   // T x k, P(regime_t | y_1..y_t)
    Eigen::MatrixXd predicted;  // T x k, P(regime_t | y_1..y_{t-1})
    Eigen::MatrixXd smoothed;   // T x k, P(regime_t | y_1..y_T); empty until kim_smooth
    double log_likelihood = 0.0;

    std::size_t length() const noexcept { return static_cast<std::size_t>(filtered.rows()); }
};

inline void validate(const RegimeParams& p) {
    const auto k = p.sigma.size();
    if (k < 1) throw validation_error("regime params: k must be >= 1");
    if (p.transition.rows() != k || p.transition.cols() != k)
        throw validation_error("regime params: transition must be k x k");
    if (!std::isfinite(p.mu)) throw validation_error("regime params: mu must be finite");
    for (Eigen::Index i = 0; i < k; ++i) {
        if (!(p.sigma(i) > 0.0) || !std::isfinite(p.sigma(i)))
            throw validation_error("regime params: sigma must be positive and finite");
        double row = 0.0;
        for (Eigen::Index j = 0; j < k; ++j) {
            double v = p.transition(i, j);
            if (!(v >= 0.0 && v <= 1.0)) throw validation_error("regime params: transition entry outside [0,1]");
            row += v;
        }
        if (std::abs(row - 1.0) > 1e-10)
            throw validation_error("regime params: transition row " + std::to_string(i) + " does not sum to 1");
    }
}

/// Stationary distribution of a row-stochastic matrix; uniform when it is not
/// unique (reducible chain).
inline Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& transition) {
    const auto k = transition.rows();
    if (k == 1) return Eigen::VectorXd::Ones(1);
    Eigen::MatrixXd generator = Eigen::MatrixXd::Identity(k, k) - transition;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(generator);
    lu.setThreshold(1e-13);
    if (lu.rank() < k - 1) return Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));

    Eigen::MatrixXd a(k + 1, k);
    a.topRows(k) = generator.transpose();
    a.row(k).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k + 1);
    rhs(k) = 1.0;
    Eigen::VectorXd pi = a.colPivHouseholderQr().solve(rhs);
    pi = pi.cwiseMax(0.0);
    double total = pi.sum();
    if (!(total > 0.0)) return Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
    return pi / total;
}

namespace detail {

inline double log_sum_exp(const Eigen::VectorXd& v) {
    double m = v.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((v.array() - m).exp().sum());
}

inline Eigen::VectorXd log_densities(const RegimeParams& p, double y) {
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
    Eigen::VectorXd out(p.sigma.size());
    for (Eigen::Index i = 0; i < p.sigma.size(); ++i) {
        double z = (y - p.mu) / p.sigma(i);
        out(i) = -half_log_2pi - std::log(p.sigma(i)) - 0.5 * z * z;
    }
    return out;
}

}  // namespace detail

/// Forward recursion. Filtered, predicted and log_likelihood are populated;
/// the first predicted row is the stationary distribution of the transition matrix.
inline InferenceResult hamilton_filter(const RegimeParams& params, std::span<const double> y) {
    validate(params);
    if (y.empty()) throw validation_error("hamilton_filter: empty series");
    for (std::size_t t = 0; t < y.size(); ++t)
        if (!std::isfinite(y[t])) throw validation_error("hamilton_filter: non-finite return at t=" + std::to_string(t));

    const auto k = static_cast<Eigen::Index>(params.k());
    const auto n = static_cast<Eigen::Index>(y.size());
    InferenceResult res;
    res.filtered.resize(n, k);
    res.predicted.resize(n, k);

    Eigen::RowVectorXd pred = stationary_distribution(params.transition).transpose();
    Eigen::VectorXd joint(k);
    double loglik = 0.0;
    for (Eigen::Index t = 0; t < n; ++t) {
        res.predicted.row(t) = pred;
        Eigen::VectorXd logdens = detail::log_densities(params, y[static_cast<std::size_t>(t)]);
        for (Eigen::Index i = 0; i < k; ++i)
            joint(i) = pred(i) > 0.0 ? std::log(pred(i)) + logdens(i) : -std::numeric_limits<double>::infinity();
        double lse = detail::log_sum_exp(joint);
        if (!std::isfinite(lse)) throw numerical_error("hamilton_filter: zero likelihood at t=" + std::to_string(t));
        loglik += lse;
        Eigen::RowVectorXd filt = (joint.array() - lse).exp().matrix().transpose();
        filt /= filt.sum();
        res.filtered.row(t) = filt;
        pred = filt * params.transition;
        pred /= pred.sum();
    }
    res.log_likelihood = loglik;
    return res;
}

inline InferenceResult hamilton_filter(const RegimeParams& params, const ReturnSeries& returns) {
    return hamilton_filter(params, std::span<const double>(returns.values));
}

namespace detail {

// filtered_{t,i} * P_ij * smoothed_{t+1,j} / predicted_{t+1,j}; 0/0 is 0.
inline double smoothing_ratio(double smoothed_next, double predicted_next, double numerator_weight, std::size_t t,
                              std::size_t j) {
    if (predicted_next > 0.0) return smoothed_next / predicted_next;
    if (smoothed_next * numerator_weight != 0.0) throw degenerate_model_error(t, j);
    return 0.0;
}

}  // namespace detail

/// Backward recursion from the filter output; returns a copy with smoothed populated.
/// Rows are renormalized after each step; `max_drift`, if given, receives the
/// largest pre-renormalization deviation of a row sum from 1.
inline InferenceResult kim_smooth(const RegimeParams& params, InferenceResult inference, double* max_drift = nullptr) {
    const auto n = inference.filtered.rows();
    const auto k = inference.filtered.cols();
    if (n == 0 || inference.predicted.rows() != n || k != static_cast<Eigen::Index>(params.k()))
        throw validation_error("kim_smooth: filtered and predicted must be populated and match params");
    inference.smoothed.resize(n, k);
    inference.smoothed.row(n - 1) = inference.filtered.row(n - 1);
    double drift = 0.0;
    Eigen::VectorXd ratio(k);
    for (Eigen::Index t = n - 2; t >= 0; --t) {
        for (Eigen::Index j = 0; j < k; ++j) {
            double col_weight = inference.filtered.row(t).dot(params.transition.col(j));
            ratio(j) = detail::smoothing_ratio(inference.smoothed(t + 1, j), inference.predicted(t + 1, j), col_weight,
                                               static_cast<std::size_t>(t + 1), static_cast<std::size_t>(j));
        }
        for (Eigen::Index i = 0; i < k; ++i)
            inference.smoothed(t, i) = inference.filtered(t, i) * params.transition.row(i).dot(ratio);
        double s = inference.smoothed.row(t).sum();
        drift = std::max(drift, std::abs(s - 1.0));
        if (!(s > 0.0)) throw numerical_error("kim_smooth: zero smoothed mass at t=" + std::to_string(t));
        inference.smoothed.row(t) /= s;
    }
    if (max_drift) *max_drift = drift;
    return inference;
}

/// Sum over t of P(regime_t = i, regime_{t+1} = j | all data), plus smoothed
/// column totals. Requires smoothed probabilities.
struct TransitionPosteriors {
    Eigen::MatrixXd pair_counts;  // k x k
    Eigen::VectorXd occupancy;    // k, sum_t smoothed_{t,i}
};

inline TransitionPosteriors transition_posteriors(const RegimeParams& params, const InferenceResult& inf) {
    const auto n = inf.smoothed.rows();
    const auto k = inf.smoothed.cols();
    if (n == 0) throw validation_error("transition_posteriors: smoothed probabilities not populated");
    TransitionPosteriors out{Eigen::MatrixXd::Zero(k, k), inf.smoothed.colwise().sum().transpose()};
    Eigen::VectorXd ratio(k);
    for (Eigen::Index t = 0; t + 1 < n; ++t) {
        for (Eigen::Index j = 0; j < k; ++j) {
            double col_weight = inf.filtered.row(t).dot(params.transition.col(j));
            ratio(j) = detail::smoothing_ratio(inf.smoothed(t + 1, j), inf.predicted(t + 1, j), col_weight,
                                               static_cast<std::size_t>(t + 1), static_cast<std::size_t>(j));
        }
        Eigen::MatrixXd xi = inf.filtered.row(t).transpose().asDiagonal() * params.transition * ratio.asDiagonal();
        double s = xi.sum();
        if (s > 0.0) out.pair_counts += xi / s;
    }
    return out;
}

/// Reorders regimes: new regime r is old regime perm[r]. Transition rows and
/// columns, sigma, and every populated probability column move together.
inline RegimeParams permute_regimes(const RegimeParams& p, std::span<const std::size_t> perm) {
    const auto k = static_cast<Eigen::Index>(p.k());
    if (static_cast<Eigen::Index>(perm.size()) != k) throw validation_error("permutation size mismatch");
    RegimeParams out{Eigen::MatrixXd(k, k), Eigen::VectorXd(k), p.mu};
    for (Eigen::Index a = 0; a < k; ++a) {
        out.sigma(a) = p.sigma(static_cast<Eigen::Index>(perm[a]));
        for (Eigen::Index b = 0; b < k; ++b)
            out.transition(a, b) = p.transition(static_cast<Eigen::Index>(perm[a]), static_cast<Eigen::Index>(perm[b]));
    }
    return out;
}

inline InferenceResult permute_regimes(const InferenceResult& inf, std::span<const std::size_t> perm) {
    auto permute_cols = [&](const Eigen::MatrixXd& m) {
        if (m.size() == 0) return m;
        Eigen::MatrixXd out(m.rows(), m.cols());
        for (Eigen::Index a = 0; a < m.cols(); ++a) out.col(a) = m.col(static_cast<Eigen::Index>(perm[a]));
        return out;
    };
    InferenceResult out;
    out.filtered = permute_cols(inf.filtered);
    out.predicted = permute_cols(inf.predicted);
    out.smoothed = permute_cols(inf.smoothed);
    out.log_likelihood = inf.log_likelihood;
    return out;
}

struct Simulation {
    ReturnSeries returns;
    std::vector<std::size_t> regimes;
};

/// Draws a regime path from the chain started at its stationary distribution
/// and y_t ~ N(mu, sigma_{regime_t}^2). Dates are weekly from 2000-01-07.
inline Simulation simulate(const RegimeParams& params, std::size_t length, std::uint64_t seed) {
    validate(params);
    if (length < 1) throw validation_error("simulate: length must be >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto draw = [&](const Eigen::VectorXd& probs) {
        double u = unif(rng);
        double acc = 0.0;
        for (Eigen::Index i = 0; i < probs.size(); ++i) {
            acc += probs(i);
            if (u < acc) return static_cast<std::size_t>(i);
        }
        return static_cast<std::size_t>(probs.size() - 1);
    };

    Simulation sim;
    sim.returns.asset_id = "simulated";
    sim.returns.source_frequency = Frequency::weekly;
    sim.regimes.reserve(length);
    const Date start(2000, 1, 7);
    std::size_t state = draw(stationary_distribution(params.transition));
    for (std::size_t t = 0; t < length; ++t) {
        if (t > 0) state = draw(params.transition.row(static_cast<Eigen::Index>(state)).transpose());
        sim.regimes.push_back(state);
        sim.returns.dates.push_back(start.plus_days(static_cast<long>(7 * t)));
        sim.returns.values.push_back(params.mu + params.sigma(static_cast<Eigen::Index>(state)) * normal(rng));
    }
    return sim;
}

}  // namespace cob
