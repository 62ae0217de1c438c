#pragma once

// Multi-restart EM for the regime-switching variance model.
//
// The M-step is a generalized EM step: sigma and mu are exact conditional
// maximizers; the transition update is the closed-form ratio of expected
// transition counts, accepted only if it does not lower the transition part of
// the expected complete-data log-likelihood (which also contains the log of the
// stationary initial distribution). Otherwise it is backtracked toward the old
// matrix. This keeps the likelihood trajectory monotone.

#include "cob/error.hpp"
#include "cob/labeling.hpp"
#include "cob/regime.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace cob {

struct FitConfig {
    std::size_t restarts = 200;
    std::size_t max_iterations = 500;
    double loglik_tolerance = 1e-6;
    std::uint64_t seed = 0;
    /// Demean the series and hold mu at 0.
    bool demean = false;
    /// Keep each restart's per-iteration log-likelihoods in RestartStats::trajectory.
    bool record_trajectories = false;
};

inline void validate(const FitConfig& c) {
    if (c.restarts < 1) throw validation_error("fit config: restarts must be >= 1");
    if (c.max_iterations < 1) throw validation_error("fit config: max_iterations must be >= 1");
    if (!(c.loglik_tolerance > 0.0)) throw validation_error("fit config: loglik_tolerance must be > 0");
}

struct RestartStats {
    std::uint64_t seed = 0;
    double final_loglik = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    bool collapsed = false;
    std::vector<double> trajectory;
};

struct FitReport {
    RegimeParams best_params;
    double best_loglik = 0.0;
    bool converged = false;
    std::size_t best_restart = 0;
    bool ordering_tie = false;
    std::vector<RestartStats> restart_stats;
    std::vector<std::size_t> occupancy;  // argmax-smoothed counts per regime
    std::size_t n = 0;
};

/// Every restart collapsed; carries the per-restart bookkeeping.
class fit_failure : public error {
public:
    fit_failure(std::size_t k, std::vector<RestartStats> stats)
        : error("fit failed: all " + std::to_string(stats.size()) + " restarts collapsed for k=" + std::to_string(k)),
          stats_(std::move(stats)) {}

    const std::vector<RestartStats>& restart_stats() const noexcept { return stats_; }

private:
    std::vector<RestartStats> stats_;
};

namespace em_detail {

constexpr double transition_floor = 1e-10;
constexpr double collapse_weight = 1e-8;
// Relative to the sample standard deviation.
constexpr double sigma_floor_ratio = 1e-4;

inline double mean(std::span<const double> y) { return std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size()); }

inline double stddev(std::span<const double> y) {
    double m = mean(y);
    double ss = 0.0;
    for (double v : y) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(y.size()));
}

inline void floor_and_normalize(Eigen::MatrixXd& p) {
    p = p.cwiseMax(transition_floor);
    for (Eigen::Index i = 0; i < p.rows(); ++i) p.row(i) /= p.row(i).sum();
}

// Transition-dependent part of the expected complete-data log-likelihood.
inline double transition_objective(const Eigen::MatrixXd& p, const Eigen::RowVectorXd& first_smoothed,
                                   const Eigen::MatrixXd& pair_counts) {
    Eigen::VectorXd pi = stationary_distribution(p);
    double q = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        if (first_smoothed(i) > 0.0) q += first_smoothed(i) * std::log(pi(i));
        for (Eigen::Index j = 0; j < p.cols(); ++j)
            if (pair_counts(i, j) > 0.0) q += pair_counts(i, j) * std::log(p(i, j));
    }
    return std::isnan(q) ? -std::numeric_limits<double>::infinity() : q;
}

}  // namespace em_detail

/// sigma_i = sample std x factor, factor log-uniform on [0.25, 4]; diagonal 0.9
/// with the remaining mass spread evenly; mu = sample mean.
inline RegimeParams init_params(std::size_t k, std::span<const double> y, std::uint64_t seed) {
    if (k < 1) throw validation_error("init_params: k must be >= 1");
    if (y.size() < k) throw validation_error("init_params: series shorter than k");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> log_factor(std::log(0.25), std::log(4.0));
    const auto kk = static_cast<Eigen::Index>(k);
    double sd = em_detail::stddev(y);
    if (!(sd > 0.0)) throw validation_error("init_params: series has zero variance");
    RegimeParams p;
    p.mu = em_detail::mean(y);
    p.sigma.resize(kk);
    for (Eigen::Index i = 0; i < kk; ++i) p.sigma(i) = sd * std::exp(log_factor(rng));
    if (k == 1) {
        p.transition = Eigen::MatrixXd::Ones(1, 1);
    } else {
        p.transition = Eigen::MatrixXd::Constant(kk, kk, 0.1 / static_cast<double>(k - 1));
        p.transition.diagonal().setConstant(0.9);
    }
    return p;
}

inline RegimeParams init_params(std::size_t k, const ReturnSeries& r, std::uint64_t seed) {
    return init_params(k, std::span<const double>(r.values), seed);
}

struct EmStepResult {
    RegimeParams params;
    /// Log-likelihood of the input params (pre-update).
    double log_likelihood = 0.0;
    /// Set when a regime's smoothed weight fell below 1e-8; params are then unchanged.
    std::optional<std::size_t> collapsed_regime;
};

struct EmOptions {
    bool fix_mu = false;
    double sigma_floor = 0.0;
};

inline EmStepResult em_step(const RegimeParams& params, std::span<const double> y, const EmOptions& opts = {}) {
    auto inf = kim_smooth(params, hamilton_filter(params, y));
    auto post = transition_posteriors(params, inf);
    EmStepResult res{params, inf.log_likelihood, std::nullopt};
    const auto k = static_cast<Eigen::Index>(params.k());
    for (Eigen::Index i = 0; i < k; ++i)
        if (post.occupancy(i) < em_detail::collapse_weight) {
            res.collapsed_regime = static_cast<std::size_t>(i);
            return res;
        }

    RegimeParams next = params;
    // sigma given the current mu
    for (Eigen::Index i = 0; i < k; ++i) {
        double ss = 0.0;
        for (std::size_t t = 0; t < y.size(); ++t) {
            double d = y[t] - params.mu;
            ss += inf.smoothed(static_cast<Eigen::Index>(t), i) * d * d;
        }
        double var = std::max(ss / post.occupancy(i), opts.sigma_floor * opts.sigma_floor);
        next.sigma(i) = std::sqrt(var);
    }
    // mu given the new sigma
    if (!opts.fix_mu) {
        double num = 0.0;
        double den = 0.0;
        for (std::size_t t = 0; t < y.size(); ++t)
            for (Eigen::Index i = 0; i < k; ++i) {
                double w = inf.smoothed(static_cast<Eigen::Index>(t), i) / (next.sigma(i) * next.sigma(i));
                num += w * y[t];
                den += w;
            }
        next.mu = num / den;
    }
    // transition
    if (k > 1) {
        Eigen::MatrixXd candidate = params.transition;
        for (Eigen::Index i = 0; i < k; ++i) {
            double row = post.pair_counts.row(i).sum();
            if (row > 0.0) candidate.row(i) = post.pair_counts.row(i) / row;
        }
        em_detail::floor_and_normalize(candidate);
        const Eigen::RowVectorXd first = inf.smoothed.row(0);
        const double q_old = em_detail::transition_objective(params.transition, first, post.pair_counts);
        double step = 1.0;
        Eigen::MatrixXd trial = candidate;
        while (em_detail::transition_objective(trial, first, post.pair_counts) < q_old) {
            step *= 0.5;
            if (step < 1e-12) {
                trial = params.transition;
                break;
            }
            trial = params.transition + step * (candidate - params.transition);
            for (Eigen::Index i = 0; i < k; ++i) trial.row(i) /= trial.row(i).sum();
        }
        next.transition = trial;
    }
    res.params = std::move(next);
    return res;
}

inline EmStepResult em_step(const RegimeParams& params, const ReturnSeries& r, const EmOptions& opts = {}) {
    return em_step(params, std::span<const double>(r.values), opts);
}

/// One EM run from `start`. Converged when two successive log-likelihoods differ
/// by less than the tolerance; `iterations` counts parameter updates made.
/// The returned params are those whose log-likelihood is `final_loglik`.
struct RestartOutcome {
    RestartStats stats;
    RegimeParams params;
};

inline RestartOutcome run_restart(RegimeParams start, std::span<const double> y, const FitConfig& config,
                                  const EmOptions& opts) {
    RestartOutcome out;
    out.params = std::move(start);
    std::optional<double> previous;
    for (std::size_t updates = 0;; ++updates) {
        auto step = em_step(out.params, y, opts);
        if (config.record_trajectories) out.stats.trajectory.push_back(step.log_likelihood);
        out.stats.final_loglik = step.log_likelihood;
        out.stats.iterations = updates;
        if (step.collapsed_regime) {
            out.stats.collapsed = true;
            return out;
        }
        if (previous && std::abs(step.log_likelihood - *previous) < config.loglik_tolerance) {
            out.stats.converged = true;
            return out;
        }
        if (updates == config.max_iterations) return out;
        previous = step.log_likelihood;
        out.params = std::move(step.params);
    }
}

/// Fits k regimes with config.restarts EM runs seeded seed + r. The best
/// converged run wins (ties to the lower restart index); if none converged,
/// the best non-collapsed run is reported with converged = false.
inline FitReport fit(std::size_t k, const ReturnSeries& returns, const FitConfig& config) {
    validate(config);
    validate(returns);
    if (k < 1) throw validation_error("fit: k must be >= 1");
    if (returns.size() < k) throw validation_error("fit: series shorter than k");

    std::vector<double> y = returns.values;
    EmOptions opts;
    if (config.demean) {
        double m = em_detail::mean(y);
        for (auto& v : y) v -= m;
        opts.fix_mu = true;
    }
    opts.sigma_floor = em_detail::sigma_floor_ratio * em_detail::stddev(y);

    FitReport rep;
    rep.n = y.size();
    std::optional<std::size_t> best;
    bool best_converged = false;
    std::vector<RegimeParams> finals;
    for (std::size_t r = 0; r < config.restarts; ++r) {
        const std::uint64_t seed = config.seed + r;
        auto start = init_params(k, y, seed);
        if (opts.fix_mu) start.mu = 0.0;
        auto outcome = run_restart(std::move(start), y, config, opts);
        outcome.stats.seed = seed;
        rep.restart_stats.push_back(outcome.stats);
        finals.push_back(std::move(outcome.params));
        const auto& s = rep.restart_stats.back();
        if (s.collapsed) continue;
        bool better = !best || (s.converged && !best_converged) ||
                      (s.converged == best_converged && s.final_loglik > rep.restart_stats[*best].final_loglik);
        if (better) {
            best = r;
            best_converged = s.converged;
        }
    }
    if (!best) throw fit_failure(k, std::move(rep.restart_stats));

    rep.best_restart = *best;
    rep.best_loglik = rep.restart_stats[*best].final_loglik;
    rep.converged = best_converged;
    auto inf = kim_smooth(finals[*best], hamilton_filter(finals[*best], y));
    auto ordered = order_regimes(finals[*best], inf);
    rep.best_params = ordered.params;
    rep.ordering_tie = ordered.tie;
    rep.occupancy.assign(k, 0);
    for (Eigen::Index t = 0; t < ordered.inference.smoothed.rows(); ++t)
        ++rep.occupancy[argmax_row(ordered.inference.smoothed, t)];
    return rep;
}

/// Demeans when the fit did; the series the report's params describe.
inline std::vector<double> fitted_series(const ReturnSeries& returns, const FitConfig& config) {
    std::vector<double> y = returns.values;
    if (config.demean) {
        double m = em_detail::mean(y);
        for (auto& v : y) v -= m;
    }
    return y;
}

}  // namespace cob
