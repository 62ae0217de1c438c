#pragma once

// Raw price ingestion: CSV parsing, period-end resampling, percent changes.

#include "cob/csv.hpp"
#include "cob/date.hpp"
#include "cob/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cob {

enum class Frequency { daily, two_day, weekly, monthly };

inline std::string_view to_string(Frequency f) {
    switch (f) {
        case Frequency::daily: return "daily";
        case Frequency::two_day: return "two_day";
        case Frequency::weekly: return "weekly";
        case Frequency::monthly: return "monthly";
    }
    return "?";
}

inline Frequency parse_frequency(std::string_view s) {
    if (s == "daily") return Frequency::daily;
    if (s == "two_day" || s == "2d" || s == "two-day") return Frequency::two_day;
    if (s == "weekly") return Frequency::weekly;
    if (s == "monthly") return Frequency::monthly;
    throw validation_error("unknown frequency '" + std::string(s) + "'");
}

/// Timestamped prices; an absent price is an explicit missing slot.
struct PriceSeries {
    std::vector<Date> dates;
    std::vector<std::optional<double>> prices;
    Frequency frequency = Frequency::daily;
    std::string asset_id;

    std::size_t size() const noexcept { return dates.size(); }
    std::size_t missing() const noexcept {
        return static_cast<std::size_t>(std::count(prices.begin(), prices.end(), std::nullopt));
    }
};

/// Percent-change series; never has missing values.
struct ReturnSeries {
    std::vector<Date> dates;
    std::vector<double> values;
    Frequency source_frequency = Frequency::weekly;
    std::string asset_id;

    std::size_t size() const noexcept { return values.size(); }
};

struct IngestOptions {
    std::string missing_marker = ".";
};

/// Counts reported in the ingest sidecar.
struct IngestCounts {
    std::size_t rows = 0;
    std::size_t missing = 0;
    std::size_t dropped_periods = 0;
};

namespace detail {

inline void check_strictly_increasing(const std::vector<Date>& dates) {
    for (std::size_t i = 1; i < dates.size(); ++i)
        if (!(dates[i - 1] < dates[i]))
            throw validation_error("dates must be strictly increasing; duplicate or unordered at " +
                                   dates[i].to_string());
}

inline long period_key(Date d, Frequency target) {
    switch (target) {
        case Frequency::daily: return d.serial();
        case Frequency::two_day: return two_day_key(d);
        case Frequency::weekly: return iso_week_key(d);
        case Frequency::monthly: return month_key(d);
    }
    return d.serial();
}

}  // namespace detail

inline void validate(const PriceSeries& s) {
    if (s.dates.size() != s.prices.size()) throw validation_error("price series: dates/prices length mismatch");
    detail::check_strictly_increasing(s.dates);
    bool any = false;
    for (std::size_t i = 0; i < s.prices.size(); ++i) {
        if (!s.prices[i]) continue;
        any = true;
        if (!(*s.prices[i] > 0.0))
            throw validation_error("price must be strictly positive at " + s.dates[i].to_string());
    }
    if (!any) throw validation_error("price series has no present prices");
}

inline void validate(const ReturnSeries& s) {
    if (s.dates.size() != s.values.size()) throw validation_error("return series: dates/values length mismatch");
    detail::check_strictly_increasing(s.dates);
    for (std::size_t i = 0; i < s.values.size(); ++i)
        if (!std::isfinite(s.values[i]))
            throw validation_error("non-finite return at " + s.dates[i].to_string());
}

/// Parses a (date, price) CSV with a header row. Rows are sorted by date.
inline PriceSeries parse_price_csv(std::string_view raw_text, std::string asset_id, Frequency frequency,
                                   const IngestOptions& opts = {}) {
    if (frequency != Frequency::daily && frequency != Frequency::monthly)
        throw validation_error("raw price series must be daily or monthly");
    auto rows = csv::read_dated_values(raw_text, opts.missing_marker);
    if (rows.empty()) throw validation_error("price CSV has no data rows");
    auto lines = csv::lines(raw_text);
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (rows[i].value && !(*rows[i].value > 0.0))
            throw validation_error("non-positive price " + csv::format_number(*rows[i].value) + " at row " +
                                   std::to_string(lines[i + 1].first));
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.date < b.date; });

    PriceSeries out;
    out.frequency = frequency;
    out.asset_id = std::move(asset_id);
    out.dates.reserve(rows.size());
    out.prices.reserve(rows.size());
    for (auto& r : rows) {
        out.dates.push_back(r.date);
        out.prices.push_back(r.value);
    }
    validate(out);
    return out;
}

/// Header plus one row per observation; absent prices written as the marker.
inline std::string write_price_csv(const PriceSeries& s, std::string_view missing_marker = ".") {
    std::string out = "DATE,VALUE\n";
    for (std::size_t i = 0; i < s.size(); ++i) {
        out += s.dates[i].to_string();
        out += ',';
        out += s.prices[i] ? csv::format_number(*s.prices[i]) : std::string(missing_marker);
        out += '\n';
    }
    return out;
}

/// Keeps observations with start <= date <= end. Either bound may be omitted.
inline PriceSeries restrict_window(const PriceSeries& s, std::optional<Date> start, std::optional<Date> end) {
    PriceSeries out;
    out.frequency = s.frequency;
    out.asset_id = s.asset_id;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (start && s.dates[i] < *start) continue;
        if (end && *end < s.dates[i]) continue;
        out.dates.push_back(s.dates[i]);
        out.prices.push_back(s.prices[i]);
    }
    if (out.size() == 0 || out.missing() == out.size())
        throw validation_error("date window leaves no present prices");
    return out;
}

namespace detail {

inline void check_resample_target(const PriceSeries& s, Frequency target) {
    if (target == Frequency::daily) throw validation_error("resample target must be two_day, weekly or monthly");
    if (s.frequency == Frequency::monthly && target != Frequency::monthly)
        throw validation_error(std::string("cannot resample monthly input to ") + std::string(to_string(target)));
}

}  // namespace detail

/// Number of target periods that contain observations but no present price.
inline std::size_t dropped_periods(const PriceSeries& s, Frequency target) {
    detail::check_resample_target(s, target);
    std::size_t dropped = 0;
    std::size_t i = 0;
    while (i < s.size()) {
        long key = detail::period_key(s.dates[i], target);
        bool present = false;
        for (; i < s.size() && detail::period_key(s.dates[i], target) == key; ++i) present |= s.prices[i].has_value();
        if (!present) ++dropped;
    }
    return dropped;
}

/// One observation per period: the last present price, dated at that observation.
/// Periods without any present price are dropped.
inline PriceSeries resample_period_end(const PriceSeries& s, Frequency target) {
    detail::check_resample_target(s, target);
    PriceSeries out;
    out.frequency = target;
    out.asset_id = s.asset_id;
    std::size_t i = 0;
    while (i < s.size()) {
        long key = detail::period_key(s.dates[i], target);
        std::optional<std::size_t> last;
        for (; i < s.size() && detail::period_key(s.dates[i], target) == key; ++i)
            if (s.prices[i]) last = i;
        if (last) {
            out.dates.push_back(s.dates[*last]);
            out.prices.push_back(s.prices[*last]);
        }
    }
    if (out.size() == 0) throw validation_error("resampling produced an empty series");
    return out;
}

/// return_t = 100 * (p_t - p_{t-1}) / p_{t-1}, dated at t.
inline ReturnSeries percent_change(const PriceSeries& s) {
    if (s.size() < 2) throw validation_error("percent_change needs at least 2 observations");
    ReturnSeries out;
    out.source_frequency = s.frequency;
    out.asset_id = s.asset_id;
    out.dates.reserve(s.size() - 1);
    out.values.reserve(s.size() - 1);
    for (std::size_t i = 1; i < s.size(); ++i) {
        if (!s.prices[i] || !s.prices[i - 1])
            throw validation_error("percent_change requires a series without missing values");
        double prev = *s.prices[i - 1];
        out.dates.push_back(s.dates[i]);
        out.values.push_back(100.0 * (*s.prices[i] - prev) / prev);
    }
    return out;
}

inline std::string write_return_csv(const ReturnSeries& r) {
    std::string out = "DATE,VALUE\n";
    for (std::size_t i = 0; i < r.size(); ++i) {
        out += r.dates[i].to_string();
        out += ',';
        out += csv::format_number(r.values[i]);
        out += '\n';
    }
    return out;
}

inline ReturnSeries parse_return_csv(std::string_view text, std::string asset_id, Frequency source_frequency) {
    auto rows = csv::read_dated_values(text, ".");
    if (rows.empty()) throw validation_error("return CSV has no data rows");
    ReturnSeries out;
    out.asset_id = std::move(asset_id);
    out.source_frequency = source_frequency;
    for (auto& r : rows) {
        if (!r.value) throw validation_error("return CSV has a missing value at " + r.date.to_string());
        out.dates.push_back(r.date);
        out.values.push_back(*r.value);
    }
    validate(out);
    return out;
}

/// Full ingest path: window, resample (unless target == input frequency), percent change.
struct IngestResult {
    PriceSeries raw;
    PriceSeries resampled;
    ReturnSeries returns;
    IngestCounts counts;
};

inline IngestResult ingest(PriceSeries raw, Frequency target, std::optional<Date> start = {},
                           std::optional<Date> end = {}) {
    IngestResult res;
    res.raw = (start || end) ? restrict_window(raw, start, end) : std::move(raw);
    res.counts.rows = res.raw.size();
    res.counts.missing = res.raw.missing();
    res.counts.dropped_periods = dropped_periods(res.raw, target);
    res.resampled = resample_period_end(res.raw, target);
    res.returns = percent_change(res.resampled);
    return res;
}

}  // namespace cob
