#include "cob/labeling.hpp"

#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace cob;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<Date> weekly_dates(std::size_t n) {
    std::vector<Date> d;
    for (std::size_t t = 0; t < n; ++t) d.push_back(Date(2001, 1, 5).plus_days(7 * static_cast<long>(t)));
    return d;
}

LabelSeries from_labels(const std::vector<std::size_t>& labels, std::size_t k) {
    Eigen::MatrixXd probs = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(k), 0.1 / static_cast<double>(k));
    for (std::size_t t = 0; t < labels.size(); ++t) probs(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(labels[t] - 1)) += 0.9;
    return assign_labels(probs, weekly_dates(labels.size()));
}

}  // namespace

TEST_CASE("order_regimes sorts by sigma and keeps the likelihood", "[labeling]") {
    RegimeParams p{Eigen::MatrixXd(3, 3), Eigen::VectorXd(3), 0.1};
    p.transition << 0.8, 0.1, 0.1, 0.2, 0.7, 0.1, 0.05, 0.05, 0.9;
    p.sigma << 3, 1, 2;
    std::mt19937_64 rng(1);
    auto y = oracle::random_series(100, 2.0, rng);
    auto inf = kim_smooth(p, hamilton_filter(p, y));
    auto o = order_regimes(p, inf);
    CHECK(o.permutation == std::vector<std::size_t>{1, 2, 0});  // (2,3,1) one-based
    CHECK(o.params.sigma == Eigen::Vector3d(1, 2, 3));
    CHECK(o.params.transition(0, 0) == 0.7);
    CHECK(o.params.transition(0, 2) == 0.2);
    CHECK(o.params.transition(2, 0) == 0.1);
    CHECK_FALSE(o.tie);
    CHECK(o.inference.smoothed.col(0) == inf.smoothed.col(1));
    CHECK_THAT(hamilton_filter(o.params, y).log_likelihood, WithinAbs(inf.log_likelihood, 1e-10));

    auto again = order_regimes(o.params, o.inference);
    CHECK(again.permutation == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("order_regimes flags ties and breaks them by index", "[labeling]") {
    RegimeParams p{Eigen::MatrixXd::Constant(2, 2, 0.5), Eigen::VectorXd::Constant(2, 2.0), 0.0};
    auto inf = kim_smooth(p, hamilton_filter(p, std::vector<double>{1.0, 2.0}));
    auto o = order_regimes(p, inf);
    CHECK(o.tie);
    CHECK(o.permutation == std::vector<std::size_t>{0, 1});
}

TEST_CASE("property: ordering leaves the likelihood unchanged and relabels by the permutation", "[labeling][property]") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 30; ++trial) {
        auto p = oracle::random_params(3, rng);
        auto y = oracle::random_series(120, 3.0, rng);
        auto inf = kim_smooth(p, hamilton_filter(p, y));
        auto o = order_regimes(p, inf);
        CHECK_THAT(hamilton_filter(o.params, y).log_likelihood, WithinAbs(inf.log_likelihood, 1e-10));
        auto before = assign_labels(inf, weekly_dates(120));
        auto after = assign_labels(o.inference, weekly_dates(120));
        for (std::size_t t = 0; t < 120; ++t) CHECK(o.permutation[after.labels[t] - 1] == before.labels[t] - 1);
    }
}

TEST_CASE("assign_labels", "[labeling]") {
    Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(4, 1);
    auto one = assign_labels(ones, weekly_dates(4));
    CHECK(one.labels == std::vector<std::size_t>{1, 1, 1, 1});

    Eigen::MatrixXd row(1, 3);
    row << 0.2, 0.5, 0.3;
    CHECK(assign_labels(row, weekly_dates(1)).labels[0] == 2);

    Eigen::MatrixXd tie(1, 3);
    tie << 0.4, 0.4, 0.2;
    CHECK(assign_labels(tie, weekly_dates(1)).labels[0] == 1);

    CHECK_THROWS_AS(assign_labels(row, weekly_dates(2)), validation_error);
}

TEST_CASE("property: labels are invariant under monotone row transforms", "[labeling][property]") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd probs(200, 4);
    for (Eigen::Index t = 0; t < 200; ++t) {
        for (Eigen::Index j = 0; j < 4; ++j) probs(t, j) = u(rng);
        probs.row(t) /= probs.row(t).sum();
    }
    auto base = assign_labels(probs, weekly_dates(200));
    Eigen::MatrixXd transformed = (probs.array() * 7.0 + 1.0).log().matrix();
    CHECK(assign_labels(transformed, weekly_dates(200)).labels == base.labels);
    Eigen::MatrixXd cubed = probs.array().cube().matrix();
    CHECK(assign_labels(cubed, weekly_dates(200)).labels == base.labels);
}

TEST_CASE("label CSV round trip", "[labeling]") {
    auto s = from_labels({1, 2, 2, 3, 1}, 3);
    auto back = parse_label_csv(write_label_csv(s));
    CHECK(back.labels == s.labels);
    CHECK(back.dates == s.dates);
    CHECK(back.probabilities == s.probabilities);
    CHECK(back.k == 3);
}

TEST_CASE("annotate without events lists segments only", "[labeling]") {
    auto s = from_labels({1, 1, 2, 2, 2, 1, 3}, 3);
    auto rep = annotate(s, {});
    CHECK(rep.events.empty());
    REQUIRE(rep.segments.size() == 4);
    CHECK(rep.segments[1].label == 2);
    CHECK(rep.segments[1].length == 3);
    CHECK(rep.segments[1].start == s.dates[2]);
    CHECK(rep.segments[1].end == s.dates[4]);
}

TEST_CASE("an event covering the whole series reproduces the global histogram", "[labeling]") {
    auto s = from_labels({1, 3, 3, 2, 1, 1, 2}, 3);
    EventAnnotation ev{{{s.dates.front(), s.dates.back(), "all", EventKind::event}}};
    auto rep = annotate(s, ev);
    REQUIRE(rep.events.size() == 1);
    CHECK(rep.events[0].label_counts == label_histogram(s));
    CHECK(rep.events[0].total == 7);
    CHECK(rep.events[0].dominant_label == 1);
}

TEST_CASE("an event over a high-variance segment is dominated by the top regime", "[labeling]") {
    std::vector<std::size_t> labels(100, 1);
    for (std::size_t t = 40; t < 60; ++t) labels[t] = 3;
    labels[10] = 2;
    auto s = from_labels(labels, 3);
    EventAnnotation ev{{{s.dates[40], s.dates[59], "crisis", EventKind::recession},
                        {s.dates[95], s.dates[99].plus_days(400), "late", EventKind::event},
                        {Date(1990, 1, 1), Date(1990, 2, 1), "before", EventKind::event}}};
    auto rep = annotate(s, ev);
    CHECK(rep.events[0].dominant_label == 3);
    CHECK(rep.events[0].dominant_share == 1.0);
    CHECK(rep.events[1].total == 5);
    CHECK(rep.events[2].total == 0);
    CHECK(rep.events[2].dominant_label == 0);
    for (const auto& seg : rep.segments) {
        bool tagged = std::find(seg.tags.begin(), seg.tags.end(), "crisis") != seg.tags.end();
        CHECK(tagged == (seg.label == 3));
    }
}

TEST_CASE("property: segments partition the series", "[labeling][property]") {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<std::size_t> lab(1, 3);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<std::size_t> labels(50 + static_cast<std::size_t>(trial));
        for (auto& l : labels) l = lab(rng);
        auto s = from_labels(labels, 3);
        auto rep = annotate(s, {});
        std::size_t next = 0;
        for (const auto& seg : rep.segments) {
            CHECK(seg.first_index == next);
            CHECK(seg.start == s.dates[seg.first_index]);
            CHECK(seg.end == s.dates[seg.first_index + seg.length - 1]);
            next += seg.length;
        }
        CHECK(next == labels.size());
        for (std::size_t i = 1; i < rep.segments.size(); ++i) CHECK(rep.segments[i].label != rep.segments[i - 1].label);
    }
}

TEST_CASE("events CSV parsing", "[labeling]") {
    auto ev = parse_events_csv("start,end,kind,tag\n2008-01-01,2009-06-30,recession,Great Recession\n"
                               "2020-03-01,2020-04-30,event,COVID-19, demand shock\n");
    REQUIRE(ev.intervals.size() == 2);
    CHECK(ev.intervals[0].kind == EventKind::recession);
    CHECK(ev.intervals[1].tag == "COVID-19,demand shock");
    CHECK_THROWS_AS(parse_events_csv("h\n2008-01-01,2007-01-01,event,x\n"), parse_error);
    CHECK_THROWS_AS(parse_events_csv("h\n2008-01-01,2009-01-01,war,x\n"), parse_error);
}

TEST_CASE("label switch frequency", "[labeling]") {
    CHECK(label_switch_frequency({1, 1, 1}) == 0.0);
    CHECK(label_switch_frequency({1, 2, 1, 2, 1}) == 1.0);
    CHECK(label_switch_frequency({1, 1, 2, 2, 2}) == 0.25);
}
