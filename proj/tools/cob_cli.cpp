// cob: regime-labeled benchmark datasets from raw price series.

#include "cob/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using cob::json;

void write_or_print(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw cob::error("cannot write '" + path + "'");
    out << content;
}

struct FitOptions {
    std::size_t restarts = 200;
    std::size_t max_iterations = 500;
    double tolerance = 1e-6;
    std::uint64_t seed = 0;
    bool demean = false;

    void add_to(CLI::App* app) {
        app->add_option("--restarts", restarts, "EM restarts per k")->capture_default_str();
        app->add_option("--max-iterations", max_iterations, "EM iteration cap")->capture_default_str();
        app->add_option("--tolerance", tolerance, "absolute log-likelihood change for convergence")->capture_default_str();
        app->add_option("--seed", seed, "base seed; restart r uses seed + r")->capture_default_str();
        app->add_flag("--demean", demean, "demean the series and fix mu = 0");
    }

    cob::FitConfig config() const {
        cob::FitConfig c;
        c.restarts = restarts;
        c.max_iterations = max_iterations;
        c.loglik_tolerance = tolerance;
        c.seed = seed;
        c.demean = demean;
        return c;
    }
};

struct ReturnsInput {
    std::string path;
    std::string asset = "series";
    std::string frequency = "weekly";

    void add_to(CLI::App* app) {
        app->add_option("--returns", path, "return CSV (date,value)")->required()->check(CLI::ExistingFile);
        app->add_option("--asset", asset, "asset id")->capture_default_str();
        app->add_option("--frequency", frequency, "sampling frequency of the returns")->capture_default_str();
    }

    cob::ReturnSeries load() const {
        return cob::parse_return_csv(cob::pipeline_detail::read_file(path), asset, cob::parse_frequency(frequency));
    }
};

std::optional<std::size_t> parse_lags(const std::string& s) {
    if (s == "auto") return std::nullopt;
    return cob::pipeline_detail::to_count("max-lags", s);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Regime-labeled benchmark datasets from raw price series"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "parse prices, resample, write percent-change returns");
    std::string in_path, in_asset = "asset", in_freq = "daily", in_resample = "auto", in_start, in_end, in_marker = ".";
    std::string in_out, in_counts, in_resampled;
    ingest->add_option("--input", in_path, "price CSV (date,value)")->required()->check(CLI::ExistingFile);
    ingest->add_option("--asset", in_asset)->capture_default_str();
    ingest->add_option("--frequency", in_freq, "daily or monthly")->capture_default_str();
    ingest->add_option("--resample", in_resample, "two_day, weekly, monthly or auto")->capture_default_str();
    ingest->add_option("--start", in_start, "drop dates before (YYYY-MM-DD)");
    ingest->add_option("--end", in_end, "drop dates after (YYYY-MM-DD)");
    ingest->add_option("--missing-marker", in_marker)->capture_default_str();
    ingest->add_option("--out", in_out, "return CSV path (default stdout)");
    ingest->add_option("--counts", in_counts, "JSON sidecar path (default <out>.json)");
    ingest->add_option("--resampled-out", in_resampled, "also write the resampled price CSV");

    // adf
    auto* adf = app.add_subcommand("adf", "augmented Dickey-Fuller test on a return series");
    ReturnsInput adf_in;
    adf_in.add_to(adf);
    std::string adf_lags = "auto", adf_out;
    adf->add_option("--max-lags", adf_lags, "lag cap or auto")->capture_default_str();
    adf->add_option("--out", adf_out, "JSON path (default stdout)");

    // select
    auto* select = app.add_subcommand("select", "fit k in a range and select by AIC + BIC + HQIC");
    ReturnsInput sel_in;
    sel_in.add_to(select);
    FitOptions sel_fit;
    sel_fit.add_to(select);
    std::size_t sel_kmin = 2, sel_kmax = 5;
    std::string sel_out, sel_table;
    select->add_option("--k-min", sel_kmin)->capture_default_str();
    select->add_option("--k-max", sel_kmax)->capture_default_str();
    select->add_option("--out", sel_out, "selection JSON path (default stdout)");
    select->add_option("--table", sel_table, "text table path");

    // fit
    auto* fitc = app.add_subcommand("fit", "multi-restart EM fit for one k");
    ReturnsInput fit_in;
    fit_in.add_to(fitc);
    FitOptions fit_opts;
    fit_opts.add_to(fitc);
    std::size_t fit_k = 3;
    std::string fit_out;
    fitc->add_option("--k", fit_k, "regime count")->capture_default_str();
    fitc->add_option("--out", fit_out, "fit JSON path (default stdout)");

    // label
    auto* label = app.add_subcommand("label", "label a return series from fitted params");
    ReturnsInput lab_in;
    lab_in.add_to(label);
    std::string lab_fit, lab_events, lab_mode = "smoothed", lab_out, lab_annot;
    bool lab_demean = false;
    label->add_option("--fit", lab_fit, "fit JSON from `cob fit`")->required()->check(CLI::ExistingFile);
    label->add_option("--events", lab_events, "events CSV (start,end,kind,tag)")->check(CLI::ExistingFile);
    label->add_option("--mode", lab_mode, "smoothed or filtered")->capture_default_str();
    label->add_flag("--demean", lab_demean, "the fit was made with --demean");
    label->add_option("--out", lab_out, "label CSV path (default stdout)");
    label->add_option("--annotated", lab_annot, "annotated report JSON path");

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "percent MSE improvement from adding labels to a ridge AR forecaster");
    ReturnsInput ev_in;
    ev_in.add_to(eval);
    std::string ev_labels, ev_horizons = "1,4,13", ev_seeds = "0..9", ev_out, ev_csv;
    std::size_t ev_lags = 13;
    cob::ForecastConfig ev_cfg;
    eval->add_option("--labels", ev_labels, "label CSV; omit to run both arms without labels")->check(CLI::ExistingFile);
    eval->add_option("--horizons", ev_horizons)->capture_default_str();
    eval->add_option("--seeds", ev_seeds)->capture_default_str();
    eval->add_option("--lags", ev_lags)->capture_default_str();
    eval->add_option("--ridge-alpha", ev_cfg.ridge_alpha)->capture_default_str();
    eval->add_option("--subsample", ev_cfg.subsample)->capture_default_str();
    eval->add_option("--out", ev_out, "MSE JSON path (default stdout)");
    eval->add_option("--csv", ev_csv, "plot-ready CSV path");

    // run
    auto* runc = app.add_subcommand("run", "full pipeline from a config file");
    std::string run_config;
    std::vector<std::string> run_sets;
    std::string run_input, run_outdir;
    runc->add_option("--config", run_config, "flat key = value config file")->check(CLI::ExistingFile);
    runc->add_option("--set", run_sets, "override one field, key=value (repeatable)");
    runc->add_option("--input", run_input, "override input");
    runc->add_option("--output-dir", run_outdir, "override output_dir");

    // plot-data
    auto* plot = app.add_subcommand("plot-data", "re-emit figure panel CSVs for a finished run");
    std::string plot_dir;
    plot->add_option("--run-dir", plot_dir, "run output directory")->required()->check(CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) {
            cob::IngestOptions opts;
            opts.missing_marker = in_marker;
            auto raw = cob::parse_price_csv(cob::pipeline_detail::read_file(in_path), in_asset,
                                            cob::parse_frequency(in_freq), opts);
            cob::Frequency target = in_resample == "auto"
                                        ? (raw.frequency == cob::Frequency::monthly ? cob::Frequency::monthly
                                                                                    : cob::Frequency::weekly)
                                        : cob::parse_frequency(in_resample);
            auto res = cob::ingest(std::move(raw), target, cob::pipeline_detail::to_date("start", in_start),
                                   cob::pipeline_detail::to_date("end", in_end));
            write_or_print(in_out, cob::write_return_csv(res.returns));
            if (!in_resampled.empty()) write_or_print(in_resampled, cob::write_price_csv(res.resampled, in_marker));
            std::string counts_path = !in_counts.empty() ? in_counts : (in_out.empty() || in_out == "-" ? "" : in_out + ".json");
            json counts = cob::to_json(res.counts);
            if (counts_path.empty())
                std::cerr << counts.dump() << "\n";
            else
                write_or_print(counts_path, counts.dump(2) + "\n");
        } else if (*adf) {
            auto r = cob::adf_test(adf_in.load(), parse_lags(adf_lags));
            write_or_print(adf_out, cob::to_json(r).dump(2) + "\n");
        } else if (*select) {
            auto rep = cob::select_k(sel_in.load(), sel_kmin, sel_kmax, sel_fit.config());
            write_or_print(sel_out, cob::to_json(rep).dump(2) + "\n");
            if (!sel_table.empty()) write_or_print(sel_table, cob::format_selection_table(rep));
            else std::cerr << cob::format_selection_table(rep);
        } else if (*fitc) {
            auto rep = cob::fit(fit_k, fit_in.load(), fit_opts.config());
            write_or_print(fit_out, cob::to_json(rep).dump(2) + "\n");
        } else if (*label) {
            if (lab_mode != "smoothed" && lab_mode != "filtered") throw cob::validation_error("--mode: smoothed or filtered");
            auto returns = lab_in.load();
            cob::FitReport fr;
            fr.best_params = cob::regime_params_from_json(
                json::parse(cob::pipeline_detail::read_file(lab_fit)).at("params"));
            cob::FitConfig fc;
            fc.demean = lab_demean;
            auto labeled = cob::label_series(fr, returns, fc, lab_mode);
            write_or_print(lab_out, cob::write_label_csv(labeled.labels));
            if (!lab_annot.empty()) {
                cob::EventAnnotation events;
                if (!lab_events.empty()) events = cob::parse_events_csv(cob::pipeline_detail::read_file(lab_events));
                write_or_print(lab_annot, cob::to_json(cob::annotate(labeled.labels, events)).dump(2) + "\n");
            }
        } else if (*eval) {
            auto returns = ev_in.load();
            std::optional<cob::LabelSeries> labels;
            if (!ev_labels.empty()) labels = cob::parse_label_csv(cob::pipeline_detail::read_file(ev_labels), returns.asset_id);
            auto seeds_sz = cob::pipeline_detail::to_list("seeds", ev_seeds);
            std::vector<std::uint64_t> seeds(seeds_sz.begin(), seeds_sz.end());
            ev_cfg.lags = ev_lags;
            auto rep = cob::evaluate(returns, labels ? &*labels : nullptr,
                                     cob::pipeline_detail::to_list("horizons", ev_horizons), seeds, ev_cfg);
            write_or_print(ev_out, cob::to_json(rep).dump(2) + "\n");
            if (!ev_csv.empty()) write_or_print(ev_csv, cob::write_mse_csv(rep));
        } else if (*runc) {
            cob::PipelineConfig cfg;
            try {
                if (!run_config.empty()) cfg = cob::parse_pipeline_config(cob::pipeline_detail::read_file(run_config));
                for (const auto& s : run_sets) {
                    auto eq = s.find('=');
                    if (eq == std::string::npos) throw cob::validation_error("--set expects key=value, got '" + s + "'");
                    cob::apply_setting(cfg, std::string(cob::csv::trim(s.substr(0, eq))),
                                       std::string(cob::csv::trim(s.substr(eq + 1))));
                }
                if (!run_input.empty()) cfg.input = run_input;
                if (!run_outdir.empty()) cfg.output_dir = run_outdir;
            } catch (const cob::error& e) {
                throw cob::pipeline_error(cob::Stage::config, e.what());
            }
            auto report = cob::run(cfg);
            std::cout << "run " << report["run_id"].get<std::string>() << ": k=" << report["fit"]["k"]
                      << " (selected " << report["selection"]["chosen_k"] << "), artifacts in " << cfg.output_dir
                      << "\n";
        } else if (*plot) {
            for (const auto& name : cob::emit_plot_data(std::filesystem::path(plot_dir))) std::cout << name << "\n";
        }
    } catch (const cob::pipeline_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
