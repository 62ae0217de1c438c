#pragma once

// Augmented Dickey-Fuller unit-root test with a constant and no trend.
//
//   dy_t = a + g * y_{t-1} + sum_{j=1..L} b_j * dy_{t-j} + e_t
//
// The lag order L is chosen by AIC over 0..max_lags on a common sample, then the
// chosen regression is re-estimated on its own full sample. P-values use
// MacKinnon's (1994) response-surface approximation; critical values use
// MacKinnon (2010).

#include "cob/error.hpp"
#include "cob/ingest.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>

namespace cob {

struct AdfResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t lags_used = 0;
    std::size_t n_effective = 0;
    std::array<double, 3> critical_values{};  // 1%, 5%, 10%
    bool reject_at_1pct = false;
    /// Statistic lay outside the approximation's domain; p_value is the boundary value.
    bool p_value_clamped = false;
    /// Smallest p-value the approximation can report.
    double p_value_floor = 0.0;
};

namespace adf_detail {

// Constant-only regression, one integrated variable.
constexpr double tau_min = -18.83;
constexpr double tau_max = 2.74;
constexpr double tau_star = -1.61;
constexpr std::array<double, 3> small_p{2.1659, 1.4412, 0.038269};
constexpr std::array<double, 4> large_p{1.7339, 0.93202, -0.12745, -0.010368};
constexpr std::array<std::array<double, 4>, 3> crit_2010{{
    {-3.43035, -6.5393, -16.786, -79.433},
    {-2.86154, -2.8903, -4.234, -40.040},
    {-2.56677, -1.5384, -2.809, 0.0},
}};

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

template <std::size_t N>
double polyval(const std::array<double, N>& c, double x) {
    double acc = 0.0;
    for (std::size_t i = N; i-- > 0;) acc = acc * x + c[i];
    return acc;
}

struct OlsFit {
    Eigen::VectorXd beta;
    Eigen::VectorXd std_errors;
    double ssr = 0.0;
    std::size_t nobs = 0;
};

inline OlsFit ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < x.cols()) throw numerical_error("ADF regression matrix is singular");
    OlsFit f;
    f.beta = qr.solve(y);
    f.nobs = static_cast<std::size_t>(x.rows());
    f.ssr = (y - x * f.beta).squaredNorm();
    const auto p = x.cols();
    if (x.rows() <= p) throw numerical_error("ADF regression has no residual degrees of freedom");
    double s2 = f.ssr / static_cast<double>(x.rows() - p);
    Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).template triangularView<Eigen::Upper>();
    Eigen::MatrixXd rinv = r.template triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
    Eigen::MatrixXd cov_perm = rinv * rinv.transpose();
    Eigen::MatrixXd cov = qr.colsPermutation() * cov_perm * qr.colsPermutation().transpose();
    f.std_errors = (s2 * cov.diagonal()).cwiseSqrt();
    return f;
}

// Rows t = first..n-1 of dy_t on [1, y_{t-1}, dy_{t-1}, ..., dy_{t-lags}].
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> design(std::span<const double> y, std::size_t lags,
                                                          std::size_t first) {
    const std::size_t n = y.size();
    const auto rows = static_cast<Eigen::Index>(n - first);
    Eigen::MatrixXd x(rows, static_cast<Eigen::Index>(2 + lags));
    Eigen::VectorXd dy(rows);
    for (std::size_t t = first; t < n; ++t) {
        const auto r = static_cast<Eigen::Index>(t - first);
        dy(r) = y[t] - y[t - 1];
        x(r, 0) = 1.0;
        x(r, 1) = y[t - 1];
        for (std::size_t j = 1; j <= lags; ++j) x(r, static_cast<Eigen::Index>(1 + j)) = y[t - j] - y[t - j - 1];
    }
    return {x, dy};
}

inline double aic(const OlsFit& f, std::size_t params) {
    const double n = static_cast<double>(f.nobs);
    double llf = -0.5 * n * (std::log(2.0 * std::numbers::pi) + std::log(f.ssr / n) + 1.0);
    return -2.0 * llf + 2.0 * static_cast<double>(params);
}

}  // namespace adf_detail

/// MacKinnon approximate p-value for the constant-only ADF statistic. The
/// statistic is clamped to the approximation's domain first.
inline double adf_p_value(double statistic, bool* clamped = nullptr) {
    using namespace adf_detail;
    double s = std::clamp(statistic, tau_min, tau_max);
    if (clamped) *clamped = s != statistic;
    if (statistic >= tau_max) return 1.0;
    return s <= tau_star ? normal_cdf(polyval(small_p, s)) : normal_cdf(polyval(large_p, s));
}

/// MacKinnon (2010) finite-sample critical values at 1%, 5%, 10%.
inline std::array<double, 3> adf_critical_values(std::size_t nobs) {
    std::array<double, 3> out{};
    const double inv = 1.0 / static_cast<double>(nobs);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& b = adf_detail::crit_2010[i];
        out[i] = b[0] + b[1] * inv + b[2] * inv * inv + b[3] * inv * inv * inv;
    }
    return out;
}

/// Default lag cap: floor(12 * (n / 100)^(1/4)).
inline std::size_t adf_auto_max_lags(std::size_t n) {
    return static_cast<std::size_t>(std::floor(12.0 * std::pow(static_cast<double>(n) / 100.0, 0.25)));
}

/// `max_lags` empty means automatic.
inline AdfResult adf_test(std::span<const double> y, std::optional<std::size_t> max_lags = std::nullopt) {
    using namespace adf_detail;
    const std::size_t n = y.size();
    for (double v : y)
        if (!std::isfinite(v)) throw validation_error("adf_test: non-finite value");
    const std::size_t cap = max_lags ? *max_lags : adf_auto_max_lags(n);
    if (n < cap + 10) throw validation_error("adf_test: series length " + std::to_string(n) + " too short for " +
                                             std::to_string(cap) + " lags");

    std::size_t best_lag = 0;
    if (cap > 0) {
        double best_aic = std::numeric_limits<double>::infinity();
        for (std::size_t lag = 0; lag <= cap; ++lag) {
            auto [x, dy] = design(y, lag, cap + 1);
            double a = aic(ols(x, dy), 2 + lag);
            if (a < best_aic) {
                best_aic = a;
                best_lag = lag;
            }
        }
    }
    auto [x, dy] = design(y, best_lag, best_lag + 1);
    auto f = ols(x, dy);

    AdfResult res;
    res.statistic = f.beta(1) / f.std_errors(1);
    res.lags_used = best_lag;
    res.n_effective = f.nobs;
    res.critical_values = adf_critical_values(f.nobs);
    res.reject_at_1pct = res.statistic < res.critical_values[0];
    res.p_value = adf_p_value(res.statistic, &res.p_value_clamped);
    res.p_value_floor = adf_p_value(tau_min);
    return res;
}

inline AdfResult adf_test(const ReturnSeries& r, std::optional<std::size_t> max_lags = std::nullopt) {
    return adf_test(std::span<const double>(r.values), max_lags);
}

}  // namespace cob
