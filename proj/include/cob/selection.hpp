#pragma once

#include "cob/em.hpp"
#include "cob/error.hpp"

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace cob {

struct InfoCriteria {
    std::size_t k = 0;
    std::size_t p = 0;
    std::size_t n = 0;
    double loglik = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    double hqic = 0.0;
    double sum = 0.0;
    bool occupancy_ok = false;
    bool converged = false;
};

/// k variances plus k(k-1) free transition probabilities. The mean is not counted.
constexpr std::size_t parameter_count(std::size_t k) noexcept { return k * k; }

inline InfoCriteria information_criteria(double loglik, std::size_t k, std::size_t p, std::size_t n) {
    if (n < 3) throw validation_error("information criteria need n >= 3");
    InfoCriteria ic;
    ic.k = k;
    ic.p = p;
    ic.n = n;
    ic.loglik = loglik;
    const double pd = static_cast<double>(p);
    const double ln_n = std::log(static_cast<double>(n));
    ic.aic = -2.0 * loglik + 2.0 * pd;
    ic.bic = -2.0 * loglik + pd * ln_n;
    ic.hqic = -2.0 * loglik + 2.0 * pd * std::log(ln_n);
    ic.sum = ic.aic + ic.bic + ic.hqic;
    return ic;
}

inline InfoCriteria information_criteria(const FitReport& fit, std::size_t k, std::size_t n) {
    auto ic = information_criteria(fit.best_loglik, k, parameter_count(k), n);
    ic.converged = fit.converged;
    ic.occupancy_ok = !fit.occupancy.empty();
    for (auto c : fit.occupancy) ic.occupancy_ok = ic.occupancy_ok && c > 0;
    return ic;
}

struct SelectionEntry {
    InfoCriteria criteria;
    std::optional<FitReport> fit;  // empty when every restart collapsed
};

struct SelectionReport {
    std::string asset_id;
    std::vector<SelectionEntry> per_k;
    std::size_t chosen_k = 0;
};

inline bool eligible(const InfoCriteria& ic) { return ic.converged && ic.occupancy_ok; }

/// Index into per_k of the eligible entry with the smallest sum (ties to smaller k).
inline std::optional<std::size_t> minimizer(const std::vector<SelectionEntry>& per_k) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < per_k.size(); ++i) {
        const auto& ic = per_k[i].criteria;
        if (!per_k[i].fit || !eligible(ic)) continue;
        if (!best || ic.sum < per_k[*best].criteria.sum ||
            (ic.sum == per_k[*best].criteria.sum && ic.k < per_k[*best].criteria.k))
            best = i;
    }
    return best;
}

class selection_failure : public error {
public:
    explicit selection_failure(SelectionReport report)
        : error("model selection failed: no k satisfies the convergence and occupancy constraints"),
          report_(std::move(report)) {}

    const SelectionReport& report() const noexcept { return report_; }

private:
    SelectionReport report_;
};

/// Fits every k in [k_min, k_max] and picks the converged, fully-occupied fit
/// with the smallest AIC + BIC + HQIC.
inline SelectionReport select_k(const ReturnSeries& returns, std::size_t k_min, std::size_t k_max,
                                const FitConfig& config) {
    const std::size_t n = returns.size();
    if (k_min < 1 || k_max < k_min) throw validation_error("select_k: empty or invalid k range");
    if (k_max > n / 10)
        throw validation_error("select_k: k_max " + std::to_string(k_max) + " exceeds T/10 = " + std::to_string(n / 10));
    SelectionReport rep;
    rep.asset_id = returns.asset_id;
    for (std::size_t k = k_min; k <= k_max; ++k) {
        SelectionEntry e;
        try {
            e.fit = fit(k, returns, config);
            e.criteria = information_criteria(*e.fit, k, n);
        } catch (const fit_failure&) {
            e.criteria = information_criteria(-std::numeric_limits<double>::infinity(), k, parameter_count(k), n);
        }
        rep.per_k.push_back(std::move(e));
    }
    auto best = minimizer(rep.per_k);
    if (!best) throw selection_failure(std::move(rep));
    rep.chosen_k = rep.per_k[*best].criteria.k;
    return rep;
}

/// Text table with columns Oil, k, AIC, BIC, HQIC, Sum, Converge. The chosen row is starred.
inline std::string format_selection_table(const SelectionReport& rep) {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-10s %3s %12s %12s %12s %12s %9s\n", "Oil", "k", "AIC", "BIC", "HQIC", "Sum",
                  "Converge");
    out += buf;
    bool first = true;
    for (const auto& e : rep.per_k) {
        const auto& ic = e.criteria;
        std::snprintf(buf, sizeof buf, "%-10s %3zu %12.0f %12.0f %12.0f %11.0f%s %9s\n",
                      first ? rep.asset_id.c_str() : "", ic.k, ic.aic, ic.bic, ic.hqic, ic.sum,
                      ic.k == rep.chosen_k ? "*" : " ", ic.converged ? "Y" : "N");
        out += buf;
        first = false;
    }
    return out;
}

}  // namespace cob
