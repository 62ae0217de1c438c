#pragma once

// JSON encodings of the library's report types.

#include "cob/em.hpp"
#include "cob/forecast.hpp"
#include "cob/ingest.hpp"
#include "cob/labeling.hpp"
#include "cob/regime.hpp"
#include "cob/selection.hpp"
#include "cob/stationarity.hpp"

#include <json.hpp>

namespace cob {

using json = nlohmann::json;

inline json to_json(const RegimeParams& p) {
    json transition = json::array();
    for (Eigen::Index i = 0; i < p.transition.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < p.transition.cols(); ++j) row.push_back(p.transition(i, j));
        transition.push_back(std::move(row));
    }
    json sigma = json::array();
    for (Eigen::Index i = 0; i < p.sigma.size(); ++i) sigma.push_back(p.sigma(i));
    return {{"k", p.k()}, {"mu", p.mu}, {"sigma", sigma}, {"transition", transition}};
}

inline RegimeParams regime_params_from_json(const json& j) {
    RegimeParams p;
    const auto& sigma = j.at("sigma");
    const auto k = static_cast<Eigen::Index>(sigma.size());
    p.sigma.resize(k);
    for (Eigen::Index i = 0; i < k; ++i) p.sigma(i) = sigma.at(static_cast<std::size_t>(i)).get<double>();
    p.transition.resize(k, k);
    const auto& tr = j.at("transition");
    if (static_cast<Eigen::Index>(tr.size()) != k) throw validation_error("params JSON: transition has wrong shape");
    for (Eigen::Index i = 0; i < k; ++i) {
        const auto& row = tr.at(static_cast<std::size_t>(i));
        if (static_cast<Eigen::Index>(row.size()) != k) throw validation_error("params JSON: transition has wrong shape");
        for (Eigen::Index c = 0; c < k; ++c) p.transition(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
    p.mu = j.at("mu").get<double>();
    validate(p);
    return p;
}

inline json to_json(const RestartStats& s) {
    json j = {{"seed", s.seed},
              {"loglik", s.final_loglik},
              {"iterations", s.iterations},
              {"converged", s.converged},
              {"collapsed", s.collapsed}};
    if (!s.trajectory.empty()) j["trajectory"] = s.trajectory;
    return j;
}

inline json to_json(const FitReport& f) {
    json restarts = json::array();
    for (const auto& s : f.restart_stats) restarts.push_back(to_json(s));
    return {{"k", f.best_params.k()},
            {"n", f.n},
            {"params", to_json(f.best_params)},
            {"loglik", f.best_loglik},
            {"converged", f.converged},
            {"best_restart", f.best_restart},
            {"ordering_tie", f.ordering_tie},
            {"occupancy", f.occupancy},
            {"restarts", restarts}};
}

inline json to_json(const InfoCriteria& ic) {
    return {{"k", ic.k},       {"p", ic.p},       {"n", ic.n},
            {"loglik", ic.loglik}, {"aic", ic.aic}, {"bic", ic.bic},
            {"hqic", ic.hqic}, {"sum", ic.sum},   {"occupancy_ok", ic.occupancy_ok},
            {"converged", ic.converged}};
}

/// `include_fits` embeds each per-k FitReport (restart stats included).
inline json to_json(const SelectionReport& rep, bool include_fits = true) {
    json per_k = json::array();
    for (const auto& e : rep.per_k) {
        json entry = {{"criteria", to_json(e.criteria)}};
        if (include_fits) entry["fit"] = e.fit ? to_json(*e.fit) : json(nullptr);
        if (e.fit) entry["occupancy"] = e.fit->occupancy;
        per_k.push_back(std::move(entry));
    }
    return {{"asset_id", rep.asset_id}, {"chosen_k", rep.chosen_k}, {"per_k", per_k}};
}

inline json to_json(const AdfResult& r) {
    return {{"statistic", r.statistic},
            {"p_value", r.p_value},
            {"p_value_clamped", r.p_value_clamped},
            {"p_value_floor", r.p_value_floor},
            {"lags_used", r.lags_used},
            {"n_effective", r.n_effective},
            {"critical_values", {{"1%", r.critical_values[0]}, {"5%", r.critical_values[1]}, {"10%", r.critical_values[2]}}},
            {"reject_at_1pct", r.reject_at_1pct}};
}

inline json to_json(const IngestCounts& c) {
    return {{"rows", c.rows}, {"missing", c.missing}, {"dropped_periods", c.dropped_periods}};
}

inline std::string_view to_string(EventKind k) { return k == EventKind::recession ? "recession" : "event"; }

inline json to_json(const AnnotatedReport& rep) {
    json events = json::array();
    for (const auto& e : rep.events) {
        events.push_back({{"start", e.interval.start.to_string()},
                          {"end", e.interval.end.to_string()},
                          {"tag", e.interval.tag},
                          {"kind", to_string(e.interval.kind)},
                          {"label_counts", e.label_counts},
                          {"total", e.total},
                          {"dominant_label", e.dominant_label},
                          {"dominant_share", e.dominant_share}});
    }
    json segments = json::array();
    for (const auto& s : rep.segments) {
        segments.push_back({{"start", s.start.to_string()},
                            {"end", s.end.to_string()},
                            {"first_index", s.first_index},
                            {"length", s.length},
                            {"label", s.label},
                            {"events", s.tags}});
    }
    return {{"events", events}, {"segments", segments}};
}

inline json to_json(const MseReport& rep) {
    json cells = json::array();
    for (const auto& c : rep.cells)
        cells.push_back({{"horizon", c.horizon},
                         {"seed", c.seed},
                         {"mse_with", c.mse_with},
                         {"mse_without", c.mse_without},
                         {"improvement_pct", c.improvement},
                         {"degenerate", c.degenerate}});
    json horizons = json::array();
    for (const auto& s : rep.horizons)
        horizons.push_back({{"horizon", s.horizon},
                            {"mean_improvement_pct", s.mean_improvement},
                            {"std_improvement_pct", s.std_improvement},
                            {"mean_mse_with", s.mean_mse_with},
                            {"mean_mse_without", s.mean_mse_without},
                            {"cells_used", s.cells_used}});
    return {{"label_mode", rep.label_mode}, {"labels_used", rep.labels_used}, {"cells", cells}, {"horizons", horizons}};
}

}  // namespace cob
