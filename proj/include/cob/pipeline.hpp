#pragma once

// End-to-end orchestration: ingest -> ADF -> select k -> fit -> order ->
// label -> annotate -> forecast evaluation, with every artifact written to an
// output directory. Files are written with a ".partial" suffix and renamed only
// once every stage has succeeded.

#include "cob/em.hpp"
#include "cob/forecast.hpp"
#include "cob/ingest.hpp"
#include "cob/labeling.hpp"
#include "cob/regime.hpp"
#include "cob/selection.hpp"
#include "cob/serialize.hpp"
#include "cob/stationarity.hpp"

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace cob {

struct PipelineConfig {
    std::string input;
    std::string asset_id = "asset";
    Frequency frequency = Frequency::daily;
    std::optional<Date> start;
    std::optional<Date> end;
    std::string missing_marker = ".";
    std::optional<Frequency> resample;  // default: weekly for daily input, monthly for monthly
    std::size_t k_min = 2;
    std::size_t k_max = 5;
    std::optional<std::size_t> global_k;
    FitConfig fit;
    std::optional<std::size_t> adf_max_lags;  // empty = automatic
    std::vector<std::size_t> horizons;          // empty = frequency default
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    std::optional<std::size_t> lags;            // empty = frequency default
    ForecastConfig forecast;
    std::string label_mode = "smoothed";
    std::string events;
    std::string output_dir = "out";
};

namespace pipeline_detail {

inline std::size_t to_count(const std::string& key, const std::string& v) {
    auto n = csv::parse_number(v);
    if (!n || *n < 0 || *n != std::floor(*n)) throw validation_error("config '" + key + "': expected a count, got '" + v + "'");
    return static_cast<std::size_t>(*n);
}

inline double to_real(const std::string& key, const std::string& v) {
    auto n = csv::parse_number(v);
    if (!n) throw validation_error("config '" + key + "': expected a number, got '" + v + "'");
    return *n;
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw validation_error("config '" + key + "': expected true/false, got '" + v + "'");
}

inline std::optional<Date> to_date(const std::string& key, const std::string& v) {
    if (v.empty() || v == "none") return std::nullopt;
    try {
        return Date::parse(v);
    } catch (const std::invalid_argument&) {
        throw validation_error("config '" + key + "': malformed date '" + v + "'");
    }
}

/// "1,4,13" or "0..9" (inclusive).
inline std::vector<std::size_t> to_list(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    if (auto dots = v.find(".."); dots != std::string::npos) {
        auto a = to_count(key, std::string(csv::trim(v.substr(0, dots))));
        auto b = to_count(key, std::string(csv::trim(v.substr(dots + 2))));
        if (b < a) throw validation_error("config '" + key + "': empty range");
        for (auto i = a; i <= b; ++i) out.push_back(i);
        return out;
    }
    for (auto cell : csv::split(v)) out.push_back(to_count(key, std::string(cell)));
    return out;
}

inline std::string join(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

inline std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 1469598103934665603ULL) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw validation_error("cannot read '" + p.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace pipeline_detail

/// Sets one field from its flat key-value spelling.
inline void apply_setting(PipelineConfig& c, const std::string& key, const std::string& value) {
    using namespace pipeline_detail;
    if (key == "input") c.input = value;
    else if (key == "asset_id") c.asset_id = value;
    else if (key == "frequency") c.frequency = parse_frequency(value);
    else if (key == "start") c.start = to_date(key, value);
    else if (key == "end") c.end = to_date(key, value);
    else if (key == "missing_marker") c.missing_marker = value;
    else if (key == "resample") c.resample = value.empty() || value == "auto" ? std::nullopt : std::optional(parse_frequency(value));
    else if (key == "k_min") c.k_min = to_count(key, value);
    else if (key == "k_max") c.k_max = to_count(key, value);
    else if (key == "global_k") c.global_k = value.empty() || value == "none" ? std::nullopt : std::optional(to_count(key, value));
    else if (key == "restarts") c.fit.restarts = to_count(key, value);
    else if (key == "max_iterations") c.fit.max_iterations = to_count(key, value);
    else if (key == "tolerance") c.fit.loglik_tolerance = to_real(key, value);
    else if (key == "seed") c.fit.seed = to_count(key, value);
    else if (key == "demean") c.fit.demean = to_bool(key, value);
    else if (key == "adf_max_lags") c.adf_max_lags = value == "auto" || value.empty() ? std::nullopt : std::optional(to_count(key, value));
    else if (key == "horizons") c.horizons = to_list(key, value);
    else if (key == "seeds") {
        auto v = to_list(key, value);
        c.seeds.assign(v.begin(), v.end());
    }
    else if (key == "lags") c.lags = value == "auto" || value.empty() ? std::nullopt : std::optional(to_count(key, value));
    else if (key == "ridge_alpha") c.forecast.ridge_alpha = to_real(key, value);
    else if (key == "ridge_jitter") c.forecast.ridge_jitter = to_real(key, value);
    else if (key == "subsample") c.forecast.subsample = to_real(key, value);
    else if (key == "train_fraction") c.forecast.train_fraction = to_real(key, value);
    else if (key == "label_mode") {
        if (value != "smoothed" && value != "filtered") throw validation_error("config 'label_mode': smoothed or filtered");
        c.label_mode = value;
    }
    else if (key == "events") c.events = value;
    else if (key == "output_dir") c.output_dir = value;
    else throw validation_error("unknown config key '" + key + "'");
}

/// Flat key-value document: one "key = value" per line, '#' starts a comment line.
inline PipelineConfig parse_pipeline_config(std::string_view text, PipelineConfig base = {}) {
    for (auto [lineno, line] : csv::lines(text)) {
        auto eq = line.find('=');
        if (eq == std::string_view::npos) throw parse_error("config line is not key = value", lineno);
        std::string key(csv::trim(line.substr(0, eq)));
        std::string value(csv::trim(line.substr(eq + 1)));
        try {
            apply_setting(base, key, value);
        } catch (const validation_error& e) {
            throw parse_error(e.what(), lineno);
        }
    }
    return base;
}

inline Frequency effective_resample(const PipelineConfig& c) {
    if (c.resample) return *c.resample;
    return c.frequency == Frequency::monthly ? Frequency::monthly : Frequency::weekly;
}

inline std::vector<std::size_t> effective_horizons(const PipelineConfig& c) {
    if (!c.horizons.empty()) return c.horizons;
    return effective_resample(c) == Frequency::monthly ? std::vector<std::size_t>{1, 3, 12}
                                                       : std::vector<std::size_t>{1, 4, 13};
}

inline std::size_t effective_lags(const PipelineConfig& c) {
    if (c.lags) return *c.lags;
    return effective_resample(c) == Frequency::monthly ? 3 : 13;
}

/// Every field with defaults resolved, as sorted key -> value text.
inline std::map<std::string, std::string> canonical_config(const PipelineConfig& c) {
    using pipeline_detail::join;
    auto opt_date = [](const std::optional<Date>& d) { return d ? d->to_string() : std::string("none"); };
    std::vector<std::size_t> seeds(c.seeds.begin(), c.seeds.end());
    return {
        {"input", c.input},
        {"asset_id", c.asset_id},
        {"frequency", std::string(to_string(c.frequency))},
        {"start", opt_date(c.start)},
        {"end", opt_date(c.end)},
        {"missing_marker", c.missing_marker},
        {"resample", std::string(to_string(effective_resample(c)))},
        {"k_min", std::to_string(c.k_min)},
        {"k_max", std::to_string(c.k_max)},
        {"global_k", c.global_k ? std::to_string(*c.global_k) : "none"},
        {"restarts", std::to_string(c.fit.restarts)},
        {"max_iterations", std::to_string(c.fit.max_iterations)},
        {"tolerance", csv::format_number(c.fit.loglik_tolerance)},
        {"seed", std::to_string(c.fit.seed)},
        {"demean", c.fit.demean ? "true" : "false"},
        {"adf_max_lags", c.adf_max_lags ? std::to_string(*c.adf_max_lags) : "auto"},
        {"horizons", join(effective_horizons(c))},
        {"seeds", join(seeds)},
        {"lags", std::to_string(effective_lags(c))},
        {"ridge_alpha", csv::format_number(c.forecast.ridge_alpha)},
        {"ridge_jitter", csv::format_number(c.forecast.ridge_jitter)},
        {"subsample", csv::format_number(c.forecast.subsample)},
        {"train_fraction", csv::format_number(c.forecast.train_fraction)},
        {"label_mode", c.label_mode},
        {"events", c.events},
        {"output_dir", c.output_dir},
    };
}

inline std::string config_hash(const PipelineConfig& c) {
    std::string text;
    for (const auto& [k, v] : canonical_config(c)) text += k + "=" + v + "\n";
    return pipeline_detail::hex(pipeline_detail::fnv1a(text));
}

inline void validate(const PipelineConfig& c) {
    if (c.input.empty()) throw validation_error("config: input is required");
    if (c.k_min < 1 || c.k_max < c.k_min) throw validation_error("config: k range is empty");
    if (c.global_k && *c.global_k < 1) throw validation_error("config: global_k must be >= 1");
    validate(c.fit);
    namespace fs = std::filesystem;
    std::set<std::string> paths;
    for (const auto& p : {c.input, c.events, c.output_dir}) {
        if (p.empty()) continue;
        if (!paths.insert(fs::weakly_canonical(fs::absolute(p)).string()).second)
            throw validation_error("config: input, events and output_dir must be distinct paths");
    }
}

/// Pipeline stages in execution order; the exit code identifies the stage.
enum class Stage { config, ingest, adf, select, fit, label, annotate, evaluate, write };

inline std::string_view to_string(Stage s) {
    constexpr std::string_view names[] = {"config", "ingest", "adf", "select", "fit", "label", "annotate", "evaluate", "write"};
    return names[static_cast<int>(s)];
}

inline int exit_code(Stage s) { return s == Stage::config ? 2 : 10 + static_cast<int>(s) - 1; }

class pipeline_error : public error {
public:
    pipeline_error(Stage stage, const std::string& what)
        : error("stage " + std::string(to_string(stage)) + " failed: " + what), stage_(stage) {}

    Stage stage() const noexcept { return stage_; }
    int exit_code() const noexcept { return cob::exit_code(stage_); }

private:
    Stage stage_;
};

/// Writes artifacts as <name>.partial; commit() renames them into place.
class ArtifactWriter {
public:
    ArtifactWriter(std::filesystem::path dir, std::string run_id, std::string config_hash)
        : dir_(std::move(dir)), run_id_(std::move(run_id)), config_hash_(std::move(config_hash)) {
        std::filesystem::create_directories(dir_);
    }

    const std::string& run_id() const noexcept { return run_id_; }
    const std::string& config_hash() const noexcept { return config_hash_; }

    /// CSV artifacts get a leading "# run_id=... config_hash=..." comment line.
    void write_csv(const std::string& name, const std::string& body) {
        write_raw(name, "# run_id=" + run_id_ + " config_hash=" + config_hash_ + "\n" + body);
    }

    /// JSON artifacts get run_id and config_hash fields.
    void write_json(const std::string& name, json body) {
        body["run_id"] = run_id_;
        body["config_hash"] = config_hash_;
        write_raw(name, body.dump(2) + "\n");
    }

    void write_text(const std::string& name, const std::string& body) {
        write_raw(name, "# run_id=" + run_id_ + " config_hash=" + config_hash_ + "\n" + body);
    }

    void commit() {
        for (const auto& name : names_)
            std::filesystem::rename(dir_ / (name + ".partial"), dir_ / name);
    }

    const std::vector<std::string>& names() const noexcept { return names_; }

private:
    void write_raw(const std::string& name, const std::string& content) {
        std::filesystem::remove(dir_ / name);
        std::ofstream out(dir_ / (name + ".partial"), std::ios::binary | std::ios::trunc);
        if (!out) throw error("cannot write '" + (dir_ / name).string() + "'");
        out << content;
        if (!out) throw error("write failed for '" + (dir_ / name).string() + "'");
        if (std::find(names_.begin(), names_.end(), name) == names_.end()) names_.push_back(name);
    }

    std::filesystem::path dir_;
    std::string run_id_;
    std::string config_hash_;
    std::vector<std::string> names_;
};

/// Series behind the four figure panels of one asset.
struct PlotInputs {
    PriceSeries prices;
    ReturnSeries returns;
    Eigen::MatrixXd smoothed;  // T x k, aligned with returns
    std::vector<std::size_t> labels;
};

/// One CSV per panel: prices, returns, smoothed probabilities, labels.
inline std::vector<std::string> emit_plot_data(const PlotInputs& in, ArtifactWriter& w) {
    const std::string& id = in.returns.asset_id;
    std::vector<std::string> names{"plot_" + id + "_price.csv", "plot_" + id + "_returns.csv",
                                   "plot_" + id + "_probabilities.csv", "plot_" + id + "_labels.csv"};
    std::string price = "date,price\n";
    for (std::size_t i = 0; i < in.prices.size(); ++i)
        price += in.prices.dates[i].to_string() + ',' +
                 (in.prices.prices[i] ? csv::format_number(*in.prices.prices[i]) : std::string(".")) + '\n';
    w.write_csv(names[0], price);

    std::string ret = "date,return_pct\n";
    for (std::size_t i = 0; i < in.returns.size(); ++i)
        ret += in.returns.dates[i].to_string() + ',' + csv::format_number(in.returns.values[i]) + '\n';
    w.write_csv(names[1], ret);

    std::string prob = "date";
    for (Eigen::Index j = 1; j <= in.smoothed.cols(); ++j) prob += ",p_" + std::to_string(j);
    prob += '\n';
    for (Eigen::Index t = 0; t < in.smoothed.rows(); ++t) {
        prob += in.returns.dates[static_cast<std::size_t>(t)].to_string();
        for (Eigen::Index j = 0; j < in.smoothed.cols(); ++j) prob += ',' + csv::format_number(in.smoothed(t, j));
        prob += '\n';
    }
    w.write_csv(names[2], prob);

    std::string lab = "date,label\n";
    for (std::size_t i = 0; i < in.labels.size(); ++i)
        lab += in.returns.dates[i].to_string() + ',' + std::to_string(in.labels[i]) + '\n';
    w.write_csv(names[3], lab);
    return names;
}

/// Ordered model, smoothed/filtered inference and labels for fitted params.
struct LabeledModel {
    OrderedModel model;
    LabelSeries labels;
};

inline LabeledModel label_series(const FitReport& fit, const ReturnSeries& returns, const FitConfig& fit_config,
                                 const std::string& mode) {
    auto y = fitted_series(returns, fit_config);
    auto inf = kim_smooth(fit.best_params, hamilton_filter(fit.best_params, y));
    LabeledModel out{order_regimes(fit.best_params, inf), {}};
    const auto& probs = mode == "filtered" ? out.model.inference.filtered : out.model.inference.smoothed;
    out.labels = assign_labels(probs, returns.dates, returns.asset_id);
    return out;
}

inline PriceSeries load_prices(const PipelineConfig& c) {
    IngestOptions opts;
    opts.missing_marker = c.missing_marker;
    return parse_price_csv(pipeline_detail::read_file(c.input), c.asset_id, c.frequency, opts);
}

/// Runs every stage; returns the run report (also written as run_report.json).
inline json run(const PipelineConfig& config) {
    Stage stage = Stage::config;
    std::optional<ArtifactWriter> writer;
    try {
        validate(config);
        const std::string chash = config_hash(config);
        const std::string input_text = pipeline_detail::read_file(config.input);
        const std::string run_id = pipeline_detail::hex(pipeline_detail::fnv1a(input_text, pipeline_detail::fnv1a(chash)));
        writer.emplace(config.output_dir, run_id, chash);
        auto& w = *writer;
        json report = {{"config", canonical_config(config)}};

        stage = Stage::ingest;
        IngestOptions opts;
        opts.missing_marker = config.missing_marker;
        auto ing = ingest(parse_price_csv(input_text, config.asset_id, config.frequency, opts), effective_resample(config),
                          config.start, config.end);
        w.write_csv("returns.csv", write_return_csv(ing.returns));
        w.write_json("ingest.json", {{"asset_id", config.asset_id}, {"counts", to_json(ing.counts)},
                                     {"resampled_length", ing.resampled.size()}, {"returns_length", ing.returns.size()}});
        report["ingest"] = {{"counts", to_json(ing.counts)}, {"returns_length", ing.returns.size()}};

        stage = Stage::adf;
        auto adf = adf_test(ing.returns, config.adf_max_lags);
        w.write_json("adf.json", to_json(adf));
        report["adf"] = to_json(adf);

        stage = Stage::select;
        SelectionReport sel;
        try {
            sel = select_k(ing.returns, config.k_min, config.k_max, config.fit);
        } catch (const selection_failure& e) {
            w.write_json("selection.json", to_json(e.report()));
            w.write_text("selection.txt", format_selection_table(e.report()));
            throw;
        }
        w.write_json("selection.json", to_json(sel));
        w.write_text("selection.txt", format_selection_table(sel));
        json per_k = json::array();
        for (const auto& e : sel.per_k) per_k.push_back(to_json(e.criteria));
        report["selection"] = {{"chosen_k", sel.chosen_k}, {"per_k", per_k}};

        stage = Stage::fit;
        const std::size_t used_k = config.global_k.value_or(sel.chosen_k);
        std::optional<FitReport> fit_report;
        for (auto& e : sel.per_k)
            if (e.criteria.k == used_k && e.fit) fit_report = *e.fit;
        if (!fit_report) fit_report = fit(used_k, ing.returns, config.fit);
        w.write_json("fit.json", to_json(*fit_report));
        report["fit"] = {{"k", used_k},
                         {"global_k_override", config.global_k.has_value()},
                         {"loglik", fit_report->best_loglik},
                         {"converged", fit_report->converged},
                         {"params", to_json(fit_report->best_params)},
                         {"occupancy", fit_report->occupancy}};

        stage = Stage::label;
        auto labeled = label_series(*fit_report, ing.returns, config.fit, config.label_mode);
        w.write_csv("labels.csv", write_label_csv(labeled.labels));
        report["labels"] = {{"mode", config.label_mode},
                            {"histogram", label_histogram(labeled.labels)},
                            {"switch_frequency", label_switch_frequency(labeled.labels.labels)},
                            {"ordering_tie", labeled.model.tie}};

        stage = Stage::annotate;
        EventAnnotation events;
        if (!config.events.empty()) events = parse_events_csv(pipeline_detail::read_file(config.events));
        auto annotated = annotate(labeled.labels, events);
        w.write_json("annotated.json", to_json(annotated));
        report["annotate"] = {{"events", events.intervals.size()}, {"segments", annotated.segments.size()}};

        stage = Stage::evaluate;
        ForecastConfig fc = config.forecast;
        fc.lags = effective_lags(config);
        fc.label_mode = config.label_mode;
        auto mse = evaluate(ing.returns, &labeled.labels, effective_horizons(config), config.seeds, fc);
        w.write_json("mse.json", to_json(mse));
        w.write_csv("mse.csv", write_mse_csv(mse));
        report["evaluate"] = to_json(mse)["horizons"];
        report["evaluate_label_mode"] = mse.label_mode;

        stage = Stage::write;
        auto smoothed_labels = assign_labels(labeled.model.inference.smoothed, ing.returns.dates);
        emit_plot_data({ing.raw, ing.returns, labeled.model.inference.smoothed, smoothed_labels.labels}, w);
        report["artifacts"] = w.names();
        report["asset_id"] = config.asset_id;
        w.write_json("run_report.json", report);
        w.commit();
        report["run_id"] = w.run_id();
        report["config_hash"] = w.config_hash();
        return report;
    } catch (const pipeline_error&) {
        throw;
    } catch (const std::exception& e) {
        throw pipeline_error(stage, e.what());
    }
}

/// Rebuilds the four plot panels of a finished run from its directory.
inline std::vector<std::string> emit_plot_data(const std::filesystem::path& run_dir) {
    auto report = json::parse(pipeline_detail::read_file(run_dir / "run_report.json"));
    PipelineConfig c;
    for (const auto& [k, v] : report.at("config").items()) apply_setting(c, k, v.get<std::string>());
    auto raw = load_prices(c);
    if (c.start || c.end) raw = restrict_window(raw, c.start, c.end);
    auto returns = parse_return_csv(pipeline_detail::read_file(run_dir / "returns.csv"), c.asset_id, effective_resample(c));
    auto fit_json = json::parse(pipeline_detail::read_file(run_dir / "fit.json"));
    FitReport fr;
    fr.best_params = regime_params_from_json(fit_json.at("params"));
    auto labeled = label_series(fr, returns, c.fit, "smoothed");
    ArtifactWriter w(run_dir, report.at("run_id").get<std::string>(), report.at("config_hash").get<std::string>());
    auto names = emit_plot_data({raw, returns, labeled.model.inference.smoothed, labeled.labels.labels}, w);
    w.commit();
    return names;
}

}  // namespace cob
