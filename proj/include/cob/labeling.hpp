#pragma once

// Regime labels: canonical regime ordering, argmax assignment, and joins
// against real-world event intervals.

#include "cob/csv.hpp"
#include "cob/date.hpp"
#include "cob/error.hpp"
#include "cob/regime.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

namespace cob {

/// Model with regimes sorted by ascending sigma. `permutation[r]` is the
/// original index of new regime r. `tie` is set when two sigmas agree within 1e-12.
struct OrderedModel {
    RegimeParams params;
    InferenceResult inference;
    std::vector<std::size_t> permutation;
    bool tie = false;
};

inline std::vector<std::size_t> ascending_sigma_permutation(const Eigen::VectorXd& sigma, bool* tie = nullptr) {
    std::vector<std::size_t> perm(static_cast<std::size_t>(sigma.size()));
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
        return sigma(static_cast<Eigen::Index>(a)) < sigma(static_cast<Eigen::Index>(b));
    });
    if (tie) {
        *tie = false;
        for (std::size_t r = 1; r < perm.size(); ++r)
            if (std::abs(sigma(static_cast<Eigen::Index>(perm[r])) - sigma(static_cast<Eigen::Index>(perm[r - 1]))) <= 1e-12)
                *tie = true;
    }
    return perm;
}

inline OrderedModel order_regimes(const RegimeParams& params, const InferenceResult& inference) {
    OrderedModel out;
    out.permutation = ascending_sigma_permutation(params.sigma, &out.tie);
    out.params = permute_regimes(params, out.permutation);
    out.inference = permute_regimes(inference, out.permutation);
    return out;
}

/// Per-date argmax label (1-based) with the probability row carried along.
struct LabelSeries {
    std::vector<Date> dates;
    std::vector<std::size_t> labels;
    Eigen::MatrixXd probabilities;  // T x k
    std::size_t k = 0;
    std::string asset_id;

    std::size_t size() const noexcept { return labels.size(); }
};

/// Index of the largest entry; the lowest index wins exact ties.
inline std::size_t argmax_row(const Eigen::MatrixXd& m, Eigen::Index row) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < m.cols(); ++j)
        if (m(row, j) > m(row, best)) best = j;
    return static_cast<std::size_t>(best);
}

inline LabelSeries assign_labels(const Eigen::MatrixXd& probabilities, const std::vector<Date>& dates,
                                 std::string asset_id = {}) {
    if (probabilities.rows() == 0) throw validation_error("assign_labels: probabilities not populated");
    if (static_cast<std::size_t>(probabilities.rows()) != dates.size())
        throw validation_error("assign_labels: " + std::to_string(dates.size()) + " dates for " +
                               std::to_string(probabilities.rows()) + " probability rows");
    LabelSeries out;
    out.dates = dates;
    out.probabilities = probabilities;
    out.k = static_cast<std::size_t>(probabilities.cols());
    out.asset_id = std::move(asset_id);
    out.labels.reserve(dates.size());
    for (Eigen::Index t = 0; t < probabilities.rows(); ++t) out.labels.push_back(argmax_row(probabilities, t) + 1);
    return out;
}

/// Labels from the smoothed probabilities of `inference`.
inline LabelSeries assign_labels(const InferenceResult& inference, const std::vector<Date>& dates,
                                 std::string asset_id = {}) {
    return assign_labels(inference.smoothed, dates, std::move(asset_id));
}

/// Count of label changes divided by the number of adjacent pairs.
inline double label_switch_frequency(const std::vector<std::size_t>& labels) {
    if (labels.size() < 2) return 0.0;
    std::size_t switches = 0;
    for (std::size_t t = 1; t < labels.size(); ++t) switches += labels[t] != labels[t - 1];
    return static_cast<double>(switches) / static_cast<double>(labels.size() - 1);
}

/// Histogram of labels 1..k (index 0 is label 1).
inline std::vector<std::size_t> label_histogram(const LabelSeries& s) {
    std::vector<std::size_t> h(s.k, 0);
    for (auto l : s.labels) ++h[l - 1];
    return h;
}

inline std::string write_label_csv(const LabelSeries& s) {
    std::string out = "date,label";
    for (std::size_t j = 1; j <= s.k; ++j) out += ",p_" + std::to_string(j);
    out += '\n';
    for (std::size_t t = 0; t < s.size(); ++t) {
        out += s.dates[t].to_string();
        out += ',' + std::to_string(s.labels[t]);
        for (std::size_t j = 0; j < s.k; ++j)
            out += ',' + csv::format_number(s.probabilities(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)));
        out += '\n';
    }
    return out;
}

/// Reads the label CSV schema (date, label, p_1..p_k). Labels are re-checked against the probabilities.
inline LabelSeries parse_label_csv(std::string_view text, std::string asset_id = {}) {
    auto rows = csv::lines(text);
    if (rows.size() < 2) throw validation_error("label CSV has no data rows");
    auto header = csv::split(rows[0].second);
    if (header.size() < 3) throw parse_error("label CSV needs date, label and at least one probability column", rows[0].first);
    const std::size_t k = header.size() - 2;
    LabelSeries out;
    out.k = k;
    out.asset_id = std::move(asset_id);
    out.probabilities.resize(static_cast<Eigen::Index>(rows.size() - 1), static_cast<Eigen::Index>(k));
    for (std::size_t r = 1; r < rows.size(); ++r) {
        auto cells = csv::split(rows[r].second);
        if (cells.size() != k + 2) throw parse_error("wrong column count", rows[r].first);
        try {
            out.dates.push_back(Date::parse(cells[0]));
        } catch (const std::invalid_argument& e) {
            throw parse_error(e.what(), rows[r].first);
        }
        auto label = csv::parse_number(cells[1]);
        if (!label || *label < 1 || *label > static_cast<double>(k) || *label != std::floor(*label))
            throw parse_error("label out of range", rows[r].first);
        out.labels.push_back(static_cast<std::size_t>(*label));
        for (std::size_t j = 0; j < k; ++j) {
            auto p = csv::parse_number(cells[j + 2]);
            if (!p) throw parse_error("malformed probability", rows[r].first);
            out.probabilities(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(j)) = *p;
        }
    }
    detail::check_strictly_increasing(out.dates);
    return out;
}

enum class EventKind { recession, event };

struct EventInterval {
    Date start;
    Date end;
    std::string tag;
    EventKind kind = EventKind::event;
};

struct EventAnnotation {
    std::vector<EventInterval> intervals;
};

/// Events CSV: header, then start,end,kind,tag. The tag is the rest of the line.
inline EventAnnotation parse_events_csv(std::string_view text) {
    auto rows = csv::lines(text);
    EventAnnotation out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        auto [lineno, line] = rows[r];
        auto cells = csv::split(line);
        if (cells.size() < 4) throw parse_error("events CSV needs start,end,kind,tag", lineno);
        EventInterval ev;
        try {
            ev.start = Date::parse(cells[0]);
            ev.end = Date::parse(cells[1]);
        } catch (const std::invalid_argument& e) {
            throw parse_error(e.what(), lineno);
        }
        if (cells[2] == "recession")
            ev.kind = EventKind::recession;
        else if (cells[2] == "event")
            ev.kind = EventKind::event;
        else
            throw parse_error("unknown event kind '" + std::string(cells[2]) + "'", lineno);
        std::string tag(cells[3]);
        for (std::size_t c = 4; c < cells.size(); ++c) tag += "," + std::string(cells[c]);
        ev.tag = std::move(tag);
        if (ev.end < ev.start) throw parse_error("event end precedes start", lineno);
        out.intervals.push_back(std::move(ev));
    }
    return out;
}

struct EventSummary {
    EventInterval interval;
    std::vector<std::size_t> label_counts;  // index 0 is label 1
    std::size_t total = 0;
    std::size_t dominant_label = 0;  // 0 when no labeled date falls inside
    double dominant_share = 0.0;
};

/// Maximal run of one label; start/end are the first and last dates of the run.
struct LabelSegment {
    Date start;
    Date end;
    std::size_t first_index = 0;
    std::size_t length = 0;
    std::size_t label = 0;
    std::vector<std::string> tags;
};

struct AnnotatedReport {
    std::vector<EventSummary> events;
    std::vector<LabelSegment> segments;
};

inline AnnotatedReport annotate(const LabelSeries& labels, const EventAnnotation& events) {
    AnnotatedReport rep;
    for (const auto& ev : events.intervals) {
        if (ev.end < ev.start) throw validation_error("event '" + ev.tag + "' ends before it starts");
        EventSummary s{ev, std::vector<std::size_t>(labels.k, 0)};
        for (std::size_t t = 0; t < labels.size(); ++t)
            if (!(labels.dates[t] < ev.start) && !(ev.end < labels.dates[t])) {
                ++s.label_counts[labels.labels[t] - 1];
                ++s.total;
            }
        if (s.total > 0) {
            auto it = std::max_element(s.label_counts.begin(), s.label_counts.end());
            s.dominant_label = static_cast<std::size_t>(it - s.label_counts.begin()) + 1;
            s.dominant_share = static_cast<double>(*it) / static_cast<double>(s.total);
        }
        rep.events.push_back(std::move(s));
    }
    std::size_t t = 0;
    while (t < labels.size()) {
        std::size_t start = t;
        while (t < labels.size() && labels.labels[t] == labels.labels[start]) ++t;
        LabelSegment seg{labels.dates[start], labels.dates[t - 1], start, t - start, labels.labels[start], {}};
        for (const auto& ev : events.intervals)
            if (!(seg.end < ev.start) && !(ev.end < seg.start)) seg.tags.push_back(ev.tag);
        rep.segments.push_back(std::move(seg));
    }
    return rep;
}

}  // namespace cob
