#pragma once

// Label-utility protocol: ridge-regularized linear autoregressive forecasts with
// and without one-hot regime labels, compared on identical chronological splits.

#include "cob/error.hpp"
#include "cob/ingest.hpp"
#include "cob/labeling.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace cob {

/// Row r has origin t = origins[r]: features y_{t-lags+1..t} (oldest first), then
/// the one-hot label at t when labels are present; target y_{t+horizon}.
/// Train rows come first; the last train target is dated no later than the first test origin.
struct ForecastDataset {
    Eigen::MatrixXd features;
    Eigen::VectorXd targets;
    std::vector<std::size_t> origins;
    std::size_t lags = 0;
    std::size_t horizon = 0;
    std::size_t label_columns = 0;
    std::size_t train_rows = 0;
    std::size_t test_start = 0;

    std::size_t rows() const noexcept { return origins.size(); }
};

inline ForecastDataset build_dataset(const ReturnSeries& returns, const LabelSeries* labels, std::size_t horizon,
                                     std::size_t lags, double train_fraction = 0.8) {
    const std::size_t n = returns.size();
    if (horizon < 1 || lags < 1) throw validation_error("build_dataset: horizon and lags must be >= 1");
    if (n <= lags + horizon + 20)
        throw validation_error("build_dataset: series length " + std::to_string(n) + " too short for lags " +
                               std::to_string(lags) + " and horizon " + std::to_string(horizon));
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw validation_error("build_dataset: bad train fraction");
    if (labels) {
        if (labels->size() != n) throw validation_error("build_dataset: labels and returns differ in length");
        for (std::size_t t = 0; t < n; ++t)
            if (labels->dates[t] != returns.dates[t])
                throw validation_error("build_dataset: label dates do not match return dates");
    }
    ForecastDataset ds;
    ds.lags = lags;
    ds.horizon = horizon;
    ds.label_columns = labels ? labels->k : 0;
    const std::size_t rows = n - lags - horizon + 1;
    const auto width = static_cast<Eigen::Index>(lags + ds.label_columns);
    ds.features = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), width);
    ds.targets.resize(static_cast<Eigen::Index>(rows));
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t t = r + lags - 1;
        ds.origins.push_back(t);
        const auto ri = static_cast<Eigen::Index>(r);
        for (std::size_t j = 0; j < lags; ++j) ds.features(ri, static_cast<Eigen::Index>(j)) = returns.values[t - lags + 1 + j];
        if (labels) ds.features(ri, static_cast<Eigen::Index>(lags + labels->labels[t] - 1)) = 1.0;
        ds.targets(ri) = returns.values[t + horizon];
    }
    ds.test_start = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(rows)));
    // Purge train rows whose target lies after the first test origin.
    ds.train_rows = ds.test_start >= horizon ? ds.test_start - horizon + 1 : 0;
    if (ds.train_rows < static_cast<std::size_t>(width) + 2 || rows - ds.test_start < 2)
        throw validation_error("build_dataset: split leaves too few train or test rows");
    return ds;
}

struct ForecastConfig {
    std::size_t lags = 13;
    double train_fraction = 0.8;
    double ridge_alpha = 1.0;
    /// lambda = ridge_alpha * exp(u), u ~ U(-jitter, jitter) per seed.
    double ridge_jitter = 0.25;
    /// Fraction of train rows drawn (without replacement) per seed.
    double subsample = 0.8;
    std::string label_mode = "smoothed";
};

/// Linear ridge model on z-scored features; the intercept is not penalized.
struct RidgeModel {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;
    Eigen::VectorXd weights;
    double intercept = 0.0;

    double predict(const Eigen::RowVectorXd& x) const {
        Eigen::RowVectorXd z = (x - mean.transpose()).cwiseProduct(scale.transpose());
        return intercept + z.dot(weights);
    }
};

inline RidgeModel fit_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda) {
    if (x.rows() < 2) throw validation_error("fit_ridge: need at least 2 rows");
    RidgeModel m;
    m.mean = x.colwise().mean().transpose();
    Eigen::MatrixXd centered = x.rowwise() - m.mean.transpose();
    m.scale.resize(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        double sd = std::sqrt(centered.col(j).squaredNorm() / static_cast<double>(x.rows()));
        m.scale(j) = sd > 1e-12 ? 1.0 / sd : 0.0;
    }
    Eigen::MatrixXd z = centered * m.scale.asDiagonal();
    m.intercept = y.mean();
    Eigen::VectorXd yc = y.array() - m.intercept;
    Eigen::MatrixXd gram = z.transpose() * z;
    gram.diagonal().array() += lambda;
    m.weights = gram.ldlt().solve(z.transpose() * yc);
    return m;
}

struct MseCell {
    std::size_t horizon = 0;
    std::uint64_t seed = 0;
    double mse_with = 0.0;
    double mse_without = 0.0;
    double improvement = 0.0;  // percent
    bool degenerate = false;
};

struct HorizonSummary {
    std::size_t horizon = 0;
    double mean_improvement = 0.0;
    double std_improvement = 0.0;
    double mean_mse_with = 0.0;
    double std_mse_with = 0.0;
    double mean_mse_without = 0.0;
    double std_mse_without = 0.0;
    std::size_t cells_used = 0;
};

struct MseReport {
    std::vector<MseCell> cells;
    std::vector<HorizonSummary> horizons;
    std::string label_mode;
    bool labels_used = false;
};

inline double percent_improvement(double mse_without, double mse_with) {
    return 100.0 * (mse_without - mse_with) / mse_without;
}

namespace forecast_detail {

inline double test_mse(const RidgeModel& m, const ForecastDataset& ds) {
    double acc = 0.0;
    for (std::size_t r = ds.test_start; r < ds.rows(); ++r) {
        double e = ds.targets(static_cast<Eigen::Index>(r)) - m.predict(ds.features.row(static_cast<Eigen::Index>(r)));
        acc += e * e;
    }
    return acc / static_cast<double>(ds.rows() - ds.test_start);
}

inline void mean_std(const std::vector<double>& v, double& mean, double& sd) {
    mean = v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
}

}  // namespace forecast_detail

/// MSE of one arm for one (horizon, seed) cell; both arms call this with the same rng stream.
inline double arm_mse(const ForecastDataset& ds, const std::vector<std::size_t>& train_idx, double lambda) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(train_idx.size()), ds.features.cols());
    Eigen::VectorXd y(static_cast<Eigen::Index>(train_idx.size()));
    for (std::size_t i = 0; i < train_idx.size(); ++i) {
        x.row(static_cast<Eigen::Index>(i)) = ds.features.row(static_cast<Eigen::Index>(train_idx[i]));
        y(static_cast<Eigen::Index>(i)) = ds.targets(static_cast<Eigen::Index>(train_idx[i]));
    }
    return forecast_detail::test_mse(fit_ridge(x, y, lambda), ds);
}

/// For each (horizon, seed), fits the forecaster with and without label columns on
/// the same train subsample and ridge weight, and records test MSEs. Without
/// labels both arms are identical.
inline MseReport evaluate(const ReturnSeries& returns, const LabelSeries* labels, const std::vector<std::size_t>& horizons,
                          const std::vector<std::uint64_t>& seeds, const ForecastConfig& config) {
    if (horizons.empty() || seeds.empty()) throw validation_error("evaluate: horizons and seeds must be non-empty");
    if (!(config.subsample > 0.0 && config.subsample <= 1.0)) throw validation_error("evaluate: subsample in (0,1]");
    MseReport rep;
    rep.label_mode = labels ? config.label_mode : "none";
    rep.labels_used = labels != nullptr;
    for (std::size_t h : horizons) {
        auto with = build_dataset(returns, labels, h, config.lags, config.train_fraction);
        auto without = build_dataset(returns, nullptr, h, config.lags, config.train_fraction);
        double target_mean = 0.0;
        double target_var = 0.0;
        const auto test_n = static_cast<double>(with.rows() - with.test_start);
        for (std::size_t r = with.test_start; r < with.rows(); ++r) target_mean += with.targets(static_cast<Eigen::Index>(r));
        target_mean /= test_n;
        for (std::size_t r = with.test_start; r < with.rows(); ++r)
            target_var += std::pow(with.targets(static_cast<Eigen::Index>(r)) - target_mean, 2);
        const bool degenerate = target_var / test_n < 1e-12;

        std::vector<double> imps;
        std::vector<double> mw;
        std::vector<double> mwo;
        for (auto seed : seeds) {
            std::mt19937_64 rng(seed * 1000003ULL + h);
            std::uniform_real_distribution<double> u(-config.ridge_jitter, config.ridge_jitter);
            const double lambda = config.ridge_alpha * std::exp(u(rng));
            std::vector<std::size_t> idx(with.train_rows);
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            std::shuffle(idx.begin(), idx.end(), rng);
            auto keep = std::max<std::size_t>(
                static_cast<std::size_t>(std::round(config.subsample * static_cast<double>(idx.size()))),
                static_cast<std::size_t>(with.features.cols()) + 2);
            idx.resize(std::min(keep, idx.size()));
            std::sort(idx.begin(), idx.end());

            MseCell cell;
            cell.horizon = h;
            cell.seed = seed;
            cell.mse_without = arm_mse(without, idx, lambda);
            cell.mse_with = labels ? arm_mse(with, idx, lambda) : cell.mse_without;
            cell.degenerate = degenerate || !(cell.mse_without > 0.0);
            cell.improvement = cell.degenerate ? 0.0 : percent_improvement(cell.mse_without, cell.mse_with);
            if (!cell.degenerate) {
                imps.push_back(cell.improvement);
                mw.push_back(cell.mse_with);
                mwo.push_back(cell.mse_without);
            }
            rep.cells.push_back(cell);
        }
        HorizonSummary s;
        s.horizon = h;
        s.cells_used = imps.size();
        forecast_detail::mean_std(imps, s.mean_improvement, s.std_improvement);
        forecast_detail::mean_std(mw, s.mean_mse_with, s.std_mse_with);
        forecast_detail::mean_std(mwo, s.mean_mse_without, s.std_mse_without);
        rep.horizons.push_back(s);
    }
    return rep;
}

/// Plot-ready rows: horizon, arm, mean, std.
inline std::string write_mse_csv(const MseReport& rep) {
    std::string out = "horizon,arm,mean,std\n";
    for (const auto& s : rep.horizons) {
        auto row = [&](const char* arm, double m, double sd) {
            out += std::to_string(s.horizon) + ',' + arm + ',' + csv::format_number(m) + ',' + csv::format_number(sd) + '\n';
        };
        row("ridge_ar_with_labels_mse", s.mean_mse_with, s.std_mse_with);
        row("ridge_ar_without_labels_mse", s.mean_mse_without, s.std_mse_without);
        row("ridge_ar_improvement_pct", s.mean_improvement, s.std_improvement);
    }
    return out;
}

}  // namespace cob
