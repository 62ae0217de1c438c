#include "cob/em.hpp"

#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <set>

using namespace cob;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

RegimeParams sticky(std::vector<double> sigmas, double diag, double mu = 0.0) {
    const auto k = static_cast<Eigen::Index>(sigmas.size());
    RegimeParams p{Eigen::MatrixXd::Constant(k, k, (1.0 - diag) / static_cast<double>(k - 1)), Eigen::VectorXd(k), mu};
    p.transition.diagonal().setConstant(diag);
    for (Eigen::Index i = 0; i < k; ++i) p.sigma(i) = sigmas[static_cast<std::size_t>(i)];
    return p;
}

double sample_mean(const std::vector<double>& y) { return std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size()); }

double sample_std(const std::vector<double>& y) {
    double m = sample_mean(y);
    double ss = 0;
    for (double v : y) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(y.size()));
}

}  // namespace

TEST_CASE("init_params", "[em]") {
    std::mt19937_64 rng(1);
    auto y = oracle::random_series(300, 4.0, rng);
    auto one = init_params(1, y, 7);
    CHECK(one.transition(0, 0) == 1.0);
    double factor = one.sigma(0) / sample_std(y);
    CHECK(factor >= 0.25);
    CHECK(factor <= 4.0);
    CHECK_THAT(one.mu, WithinAbs(sample_mean(y), 1e-12));

    auto a = init_params(3, y, 9);
    auto b = init_params(3, y, 9);
    CHECK(a.sigma == b.sigma);
    CHECK(a.transition == b.transition);
    CHECK(a.transition(0, 0) == 0.9);
    CHECK_THAT(a.transition(0, 1), WithinAbs(0.05, 1e-15));
    validate(a);

    CHECK_THROWS_AS(init_params(4, std::vector<double>{1.0, 2.0}, 0), validation_error);
}

TEST_CASE("init_params: 200 seeds give 200 distinct sigma vectors", "[em]") {
    auto sim = simulate(sticky({1.0, 3.0, 9.0}, 0.97), 1900, 5);
    std::set<std::vector<double>> seen;
    for (std::uint64_t s = 0; s < 200; ++s) {
        auto p = init_params(3, sim.returns, s);
        seen.insert(std::vector<double>(p.sigma.data(), p.sigma.data() + p.sigma.size()));
    }
    CHECK(seen.size() == 200);
}

TEST_CASE("em_step with k=1 gives the closed-form MLE in one step", "[em]") {
    std::mt19937_64 rng(2);
    auto y = oracle::random_series(400, 2.0, rng);
    for (auto& v : y) v += 0.7;
    auto p = init_params(1, y, 3);
    auto s1 = em_step(p, y);
    CHECK_THAT(s1.params.mu, WithinAbs(sample_mean(y), 1e-12));
    CHECK_THAT(s1.params.sigma(0), WithinRel(sample_std(y), 1e-12));
    auto s2 = em_step(s1.params, y);
    CHECK_THAT(s2.params.sigma(0), WithinRel(s1.params.sigma(0), 1e-12));
    CHECK_THAT(s2.params.mu, WithinAbs(s1.params.mu, 1e-12));
    CHECK_THAT(s2.log_likelihood, WithinAbs(oracle::iid_gaussian_loglik(y, sample_mean(y), sample_std(y)), 1e-8));
}

TEST_CASE("property: EM log-likelihood is monotone", "[em][property]") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        std::size_t k = 2 + static_cast<std::size_t>(trial % 3);
        auto truth = oracle::random_params(k, rng);
        auto sim = simulate(truth, 300, static_cast<std::uint64_t>(trial));
        auto p = init_params(k, sim.returns, static_cast<std::uint64_t>(100 + trial));
        double prev = -std::numeric_limits<double>::infinity();
        for (int it = 0; it < 60; ++it) {
            auto st = em_step(p, sim.returns);
            if (st.collapsed_regime) break;
            CHECK(st.log_likelihood - prev >= -1e-8);
            prev = st.log_likelihood;
            p = st.params;
        }
    }
}

TEST_CASE("em_step signals a collapsed regime", "[em]") {
    std::mt19937_64 rng(4);
    auto y = oracle::random_series(200, 1.0, rng);
    RegimeParams p = sticky({1.0, 1e12}, 0.9);
    auto st = em_step(p, y);
    REQUIRE(st.collapsed_regime.has_value());
    CHECK(*st.collapsed_regime == 1);
    FitConfig cfg;
    auto out = run_restart(p, y, cfg, {});
    CHECK(out.stats.collapsed);
    CHECK_FALSE(out.stats.converged);
}

TEST_CASE("fit k=1 converges in two updates to the Gaussian MLE", "[em]") {
    std::mt19937_64 rng(5);
    auto y = oracle::random_series(500, 3.0, rng);
    ReturnSeries r;
    for (std::size_t t = 0; t < y.size(); ++t) r.dates.push_back(Date(2000, 1, 3).plus_days(7 * static_cast<long>(t)));
    r.values = y;
    FitConfig cfg;
    cfg.restarts = 3;
    auto rep = fit(1, r, cfg);
    CHECK(rep.converged);
    for (const auto& s : rep.restart_stats) CHECK(s.iterations <= 2);
    CHECK_THAT(rep.best_loglik, WithinAbs(oracle::iid_gaussian_loglik(y, sample_mean(y), sample_std(y)), 1e-8));
    CHECK(rep.occupancy == std::vector<std::size_t>{500});
}

TEST_CASE("fit recovers a simulated two-regime model", "[em]") {
    auto truth = sticky({1.0, 8.0}, 0.98);
    auto sim = simulate(truth, 2000, 21);
    FitConfig cfg;
    cfg.restarts = 5;
    auto rep = fit(2, sim.returns, cfg);
    REQUIRE(rep.converged);
    CHECK(std::abs(rep.best_params.sigma(0) / 1.0 - 1.0) < 0.15);
    CHECK(std::abs(rep.best_params.sigma(1) / 8.0 - 1.0) < 0.15);
    CHECK(rep.occupancy[0] + rep.occupancy[1] == 2000);
    CHECK(rep.occupancy[0] > 0);
    CHECK(rep.occupancy[1] > 0);
}

TEST_CASE("fit is deterministic and canonically ordered", "[em]") {
    auto sim = simulate(sticky({1.0, 3.0, 9.0}, 0.95), 600, 8);
    FitConfig cfg;
    cfg.restarts = 4;
    cfg.seed = 77;
    auto a = fit(3, sim.returns, cfg);
    auto b = fit(3, sim.returns, cfg);
    CHECK(a.best_params.sigma == b.best_params.sigma);
    CHECK(a.best_params.transition == b.best_params.transition);
    CHECK(a.best_loglik == b.best_loglik);
    CHECK(a.occupancy == b.occupancy);
    REQUIRE(a.restart_stats.size() == 4);
    for (std::size_t r = 0; r < 4; ++r) {
        CHECK(a.restart_stats[r].seed == 77 + r);
        CHECK(a.restart_stats[r].final_loglik == b.restart_stats[r].final_loglik);
    }
    for (Eigen::Index i = 1; i < 3; ++i) CHECK(a.best_params.sigma(i - 1) < a.best_params.sigma(i));
    std::size_t total = 0;
    for (auto c : a.occupancy) total += c;
    CHECK(total == 600);
}

TEST_CASE("best_loglik is the max over converged restarts", "[em]") {
    auto sim = simulate(sticky({1.0, 4.0}, 0.95), 400, 12);
    FitConfig cfg;
    cfg.restarts = 6;
    auto rep = fit(2, sim.returns, cfg);
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& s : rep.restart_stats)
        if (s.converged) best = std::max(best, s.final_loglik);
    CHECK(rep.best_loglik == best);
    CHECK(rep.restart_stats[rep.best_restart].final_loglik == best);
}

TEST_CASE("non-convergence is reported, not hidden", "[em]") {
    auto sim = simulate(sticky({1.0, 4.0}, 0.95), 400, 12);
    FitConfig cfg;
    cfg.restarts = 2;
    cfg.max_iterations = 1;
    cfg.loglik_tolerance = 1e-300;
    auto rep = fit(2, sim.returns, cfg);
    CHECK_FALSE(rep.converged);
    for (const auto& s : rep.restart_stats) {
        CHECK_FALSE(s.converged);
        CHECK(s.iterations == 1);
    }
}

TEST_CASE("property: final loglik is invariant under permuting the initialization", "[em][property]") {
    auto sim = simulate(sticky({1.0, 3.0, 7.0}, 0.95), 500, 31);
    FitConfig cfg;
    cfg.max_iterations = 2000;
    cfg.loglik_tolerance = 1e-10;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto start = init_params(3, sim.returns, seed);
        auto a = run_restart(start, sim.returns.values, cfg, {});
        std::vector<std::size_t> perm{2, 0, 1};
        auto b = run_restart(permute_regimes(start, perm), sim.returns.values, cfg, {});
        CHECK_THAT(a.stats.final_loglik, WithinAbs(b.stats.final_loglik, 1e-8));
    }
}

TEST_CASE("demean holds mu at zero", "[em]") {
    auto sim = simulate(sticky({1.0, 4.0}, 0.95, 2.5), 400, 3);
    FitConfig cfg;
    cfg.restarts = 2;
    cfg.demean = true;
    auto rep = fit(2, sim.returns, cfg);
    CHECK(rep.best_params.mu == 0.0);
}

TEST_CASE("fit config validation", "[em]") {
    auto sim = simulate(sticky({1.0, 4.0}, 0.95), 50, 3);
    FitConfig cfg;
    cfg.restarts = 0;
    CHECK_THROWS_AS(fit(2, sim.returns, cfg), validation_error);
    cfg = {};
    cfg.loglik_tolerance = 0;
    CHECK_THROWS_AS(fit(2, sim.returns, cfg), validation_error);
    CHECK_THROWS_AS(fit(60, sim.returns, FitConfig{}), validation_error);
}
